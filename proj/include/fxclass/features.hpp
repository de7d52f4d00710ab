#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fxclass/fft.hpp"
#include "fxclass/wav.hpp"

namespace fxclass {

inline constexpr int kFftSize = 1024;
inline constexpr int kHop = 256;  // 75% overlap
inline constexpr int kNumMels = 80;
inline constexpr double kMelLoHz = 40.0;
inline constexpr double kMelHiHz = 7600.0;
inline constexpr double kLogFloor = 1e-10;
inline constexpr std::uint32_t kUnlabeled = 0xFFFFFFFFu;

/// Dense row-major matrix of floats, rows x cols.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<float> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0f) {}
    float& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    float at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

/// Magnitude STFT, uncentered: frame t covers samples [t*hop, t*hop + fft_size).
/// Output is (fft_size/2 + 1) x n_frames with n_frames = floor((len - fft)/hop) + 1.
inline Matrix stft_magnitude(const AudioClip& clip, int fft_size = kFftSize, int hop = kHop) {
    const std::size_t len = clip.samples.size();
    if (len < static_cast<std::size_t>(fft_size))
        throw std::invalid_argument("stft: clip shorter than fft_size");
    const int n_frames = static_cast<int>((len - fft_size) / hop) + 1;
    const int n_bins = fft_size / 2 + 1;
    const std::vector<double> window = hann_window(static_cast<std::size_t>(fft_size));

    Matrix mag(n_bins, n_frames);
    std::vector<double> frame(static_cast<std::size_t>(fft_size));
    for (int t = 0; t < n_frames; ++t) {
        const std::size_t off = static_cast<std::size_t>(t) * hop;
        for (int i = 0; i < fft_size; ++i)
            frame[static_cast<std::size_t>(i)] = clip.samples[off + i] * window[static_cast<std::size_t>(i)];
        auto spec = fft_real(frame);
        for (int f = 0; f < n_bins; ++f)
            mag.at(f, t) = static_cast<float>(std::abs(spec[static_cast<std::size_t>(f)]));
    }
    return mag;
}

/// Triangular mel filterbank, n_mels x (fft_size/2 + 1). Centers are equally
/// spaced on the mel scale between f_lo and f_hi; each triangle peaks at 1.
inline Matrix mel_filterbank(int n_mels = kNumMels, double f_lo = kMelLoHz,
                             double f_hi = kMelHiHz, int fft_size = kFftSize,
                             int sample_rate = 16000) {
    if (!(f_lo < f_hi) || f_hi > sample_rate / 2.0)
        throw std::invalid_argument("mel_filterbank: invalid frequency range");
    const int n_bins = fft_size / 2 + 1;
    const double mel_lo = hz_to_mel(f_lo);
    const double mel_hi = hz_to_mel(f_hi);

    // n_mels + 2 edge points; triangle m spans [edge[m], edge[m+2]] with its
    // peak at edge[m+1].
    std::vector<double> edges_hz(static_cast<std::size_t>(n_mels) + 2);
    for (int i = 0; i < n_mels + 2; ++i)
        edges_hz[static_cast<std::size_t>(i)] =
            mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));

    Matrix fb(n_mels, n_bins);
    const double bin_hz = static_cast<double>(sample_rate) / fft_size;
    for (int m = 0; m < n_mels; ++m) {
        const double lo = edges_hz[static_cast<std::size_t>(m)];
        const double center = edges_hz[static_cast<std::size_t>(m) + 1];
        const double hi = edges_hz[static_cast<std::size_t>(m) + 2];
        for (int k = 0; k < n_bins; ++k) {
            const double f = k * bin_hz;
            double w = 0.0;
            if (f > lo && f < hi)
                w = (f <= center) ? (f - lo) / (center - lo) : (hi - f) / (hi - center);
            fb.at(m, k) = static_cast<float>(w);
        }
    }
    return fb;
}

/// 80 x 247 log-mel energies for a 4 s, 16 kHz clip.
struct LogMelSpectrogram {
    Matrix values;  // n_mels x n_frames
};

/// ln(max(M * S, floor)) with S the magnitude spectrogram and M the filterbank.
inline LogMelSpectrogram log_mel(const AudioClip& clip, const Matrix& filterbank) {
    const Matrix mag = stft_magnitude(clip);
    if (filterbank.cols != mag.rows)
        throw std::invalid_argument("log_mel: filterbank/spectrogram size mismatch");
    LogMelSpectrogram out;
    out.values = Matrix(filterbank.rows, mag.cols);
    for (int m = 0; m < filterbank.rows; ++m) {
        for (int t = 0; t < mag.cols; ++t) {
            double acc = 0.0;
            for (int k = 0; k < mag.rows; ++k)
                acc += static_cast<double>(filterbank.at(m, k)) * mag.at(k, t);
            out.values.at(m, t) = static_cast<float>(std::log(std::max(acc, kLogFloor)));
        }
    }
    return out;
}

inline LogMelSpectrogram log_mel(const AudioClip& clip) {
    static const Matrix fb = mel_filterbank();
    return log_mel(clip, fb);
}

struct FeatureIoError : std::runtime_error {
    explicit FeatureIoError(const std::string& what) : std::runtime_error("lmel: " + what) {}
};

namespace detail {
inline void put_u32(std::ofstream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}
inline std::uint32_t get_u32(std::ifstream& is, const std::string& path) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw FeatureIoError("truncated file: " + path);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
}  // namespace detail

/// LMEL feature file: magic "LMEL", u32 version=1, u32 n_mels, u32 n_frames,
/// u32 label (0xFFFFFFFF if unlabeled), then n_mels*n_frames f32 LE, mel-major.
inline void save_features(const Matrix& features, std::uint32_t label, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FeatureIoError("cannot write: " + path);
    os.write("LMEL", 4);
    detail::put_u32(os, 1);
    detail::put_u32(os, static_cast<std::uint32_t>(features.rows));
    detail::put_u32(os, static_cast<std::uint32_t>(features.cols));
    detail::put_u32(os, label);
    static_assert(sizeof(float) == 4);
    os.write(reinterpret_cast<const char*>(features.data.data()),
             static_cast<std::streamsize>(features.data.size() * 4));
    if (!os) throw FeatureIoError("write failed: " + path);
}

inline Matrix load_features(const std::string& path, std::uint32_t* label_out = nullptr) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FeatureIoError("cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "LMEL", 4) != 0)
        throw FeatureIoError("bad magic: " + path);
    const std::uint32_t version = detail::get_u32(is, path);
    if (version != 1) throw FeatureIoError("unsupported version: " + path);
    const std::uint32_t n_mels = detail::get_u32(is, path);
    const std::uint32_t n_frames = detail::get_u32(is, path);
    const std::uint32_t label = detail::get_u32(is, path);
    Matrix m(static_cast<int>(n_mels), static_cast<int>(n_frames));
    is.read(reinterpret_cast<char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * 4));
    if (!is) throw FeatureIoError("truncated data: " + path);
    if (label_out) *label_out = label;
    return m;
}

}  // namespace fxclass
