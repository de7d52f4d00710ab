#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fxclass {

/// Mono sample buffer; the unit every effect and feature stage transforms.
struct AudioClip {
    std::vector<float> samples;
    int sample_rate = 16000;

    double duration_s() const {
        return static_cast<double>(samples.size()) / sample_rate;
    }
};

struct WavFileNotFound : std::runtime_error {
    explicit WavFileNotFound(const std::string& path)
        : std::runtime_error("wav: file not found: " + path) {}
};

struct WavMalformed : std::runtime_error {
    explicit WavMalformed(const std::string& path, const std::string& what)
        : std::runtime_error("wav: malformed file: " + path + " (" + what + ")") {}
};

struct WavUnsupported : std::runtime_error {
    explicit WavUnsupported(const std::string& path, const std::string& what)
        : std::runtime_error("wav: unsupported encoding: " + path + " (" + what + ")") {}
};

struct WavUnwritable : std::runtime_error {
    explicit WavUnwritable(const std::string& path)
        : std::runtime_error("wav: cannot write: " + path) {}
};

namespace detail {

inline std::uint32_t read_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16le(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_u16le(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace detail

/// Read a RIFF/WAVE file. Accepts PCM16 (format 1) and float32 (format 3);
/// multi-channel input is downmixed by arithmetic mean.
inline AudioClip load_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw WavFileNotFound(path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw WavMalformed(path, "not a RIFF/WAVE container");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    const unsigned char* data = nullptr;
    std::size_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
        std::uint32_t len = detail::read_u32le(bytes.data() + pos + 4);
        pos += 8;
        if (pos + len > bytes.size()) throw WavMalformed(path, "chunk overruns file");
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (len < 16) throw WavMalformed(path, "fmt chunk too short");
            format = detail::read_u16le(bytes.data() + pos);
            channels = detail::read_u16le(bytes.data() + pos + 2);
            rate = detail::read_u32le(bytes.data() + pos + 4);
            bits = detail::read_u16le(bytes.data() + pos + 14);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data = bytes.data() + pos;
            data_len = len;
        }
        pos += len + (len & 1);  // chunks are word-aligned
    }
    if (!have_fmt || data == nullptr) throw WavMalformed(path, "missing fmt or data chunk");
    if (channels == 0 || rate == 0) throw WavMalformed(path, "bad fmt fields");

    AudioClip clip;
    clip.sample_rate = static_cast<int>(rate);
    if (format == 1 && bits == 16) {
        const std::size_t n_frames = data_len / (2 * channels);
        clip.samples.resize(n_frames);
        for (std::size_t i = 0; i < n_frames; ++i) {
            double acc = 0.0;
            for (std::uint16_t c = 0; c < channels; ++c) {
                std::int16_t s;
                std::memcpy(&s, data + 2 * (i * channels + c), 2);
                acc += static_cast<double>(s) / 32768.0;
            }
            clip.samples[i] = static_cast<float>(acc / channels);
        }
    } else if (format == 3 && bits == 32) {
        const std::size_t n_frames = data_len / (4 * channels);
        clip.samples.resize(n_frames);
        for (std::size_t i = 0; i < n_frames; ++i) {
            double acc = 0.0;
            for (std::uint16_t c = 0; c < channels; ++c) {
                float s;
                std::memcpy(&s, data + 4 * (i * channels + c), 4);
                acc += s;
            }
            clip.samples[i] = static_cast<float>(acc / channels);
        }
    } else {
        throw WavUnsupported(path, "format " + std::to_string(format) + ", " +
                                       std::to_string(bits) + " bit");
    }
    if (clip.samples.empty()) throw WavMalformed(path, "empty data chunk");
    return clip;
}

/// Write mono 16-bit PCM. Samples are clamped to [-1, 1] before quantization,
/// so load_wav(save_wav(c)) round-trips within one quantization step.
inline void save_wav(const AudioClip& clip, const std::string& path) {
    std::string out;
    const std::uint32_t n = static_cast<std::uint32_t>(clip.samples.size());
    const std::uint32_t data_len = n * 2;
    out.reserve(44 + data_len);
    out.append("RIFF");
    detail::put_u32le(out, 36 + data_len);
    out.append("WAVE");
    out.append("fmt ");
    detail::put_u32le(out, 16);
    detail::put_u16le(out, 1);  // PCM
    detail::put_u16le(out, 1);  // mono
    detail::put_u32le(out, static_cast<std::uint32_t>(clip.sample_rate));
    detail::put_u32le(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
    detail::put_u16le(out, 2);
    detail::put_u16le(out, 16);
    out.append("data");
    detail::put_u32le(out, data_len);
    for (float x : clip.samples) {
        const float c = std::clamp(x, -1.0f, 1.0f);
        const auto q = static_cast<std::int16_t>(std::lrint(c * 32767.0f));
        detail::put_u16le(out, static_cast<std::uint16_t>(q));
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw WavUnwritable(path);
    os.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!os) throw WavUnwritable(path);
}

/// Force a clip to exactly round(seconds * sample_rate) samples: truncate the
/// tail of longer clips, zero-pad the tail of shorter ones. Keeping the head
/// preserves the attack transient.
inline AudioClip fix_length(const AudioClip& clip, double seconds = 4.0) {
    const auto target = static_cast<std::size_t>(
        std::llround(seconds * static_cast<double>(clip.sample_rate)));
    AudioClip out;
    out.sample_rate = clip.sample_rate;
    out.samples = clip.samples;
    out.samples.resize(target, 0.0f);
    return out;
}

}  // namespace fxclass
