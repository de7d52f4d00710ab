#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "fxclass/fft.hpp"
#include "fxclass/rng.hpp"
#include "fxclass/wav.hpp"

namespace fxclass {

enum class EffectKind {
    kBitcrushDistortion,
    kSaturation,
    kReverb,
    kEcho,
    kFlanger,
    kChorus,
    kPitchShift,
};

enum class Variant { kA, kB };  // A drives the train split, B valid/test

inline const char* effect_kind_name(EffectKind k) {
    switch (k) {
        case EffectKind::kBitcrushDistortion: return "distortion";
        case EffectKind::kSaturation: return "saturation";
        case EffectKind::kReverb: return "reverb";
        case EffectKind::kEcho: return "echo";
        case EffectKind::kFlanger: return "flanger";
        case EffectKind::kChorus: return "chorus";
        case EffectKind::kPitchShift: return "pitch_shift";
    }
    return "?";
}

inline EffectKind effect_kind_from_name(const std::string& name) {
    if (name == "distortion") return EffectKind::kBitcrushDistortion;
    if (name == "saturation") return EffectKind::kSaturation;
    if (name == "reverb") return EffectKind::kReverb;
    if (name == "echo") return EffectKind::kEcho;
    if (name == "flanger") return EffectKind::kFlanger;
    if (name == "chorus") return EffectKind::kChorus;
    if (name == "pitch_shift") return EffectKind::kPitchShift;
    throw std::invalid_argument("unknown effect kind: " + name);
}

inline const std::vector<EffectKind>& all_effect_kinds() {
    static const std::vector<EffectKind> kinds = {
        EffectKind::kBitcrushDistortion, EffectKind::kSaturation, EffectKind::kReverb,
        EffectKind::kEcho,               EffectKind::kFlanger,    EffectKind::kChorus,
        EffectKind::kPitchShift,
    };
    return kinds;
}

struct EffectConfigError : std::invalid_argument {
    explicit EffectConfigError(const std::string& what)
        : std::invalid_argument("effect config: " + what) {}
};

// ---------------------------------------------------------------------------
// Parameter records, one per effect kind.

struct EchoParams {
    double delay_ms = 181.7;
    double feedback = 0.5;
    double wet = 0.7;
    double dry = 1.0;

    void validate() const {
        if (delay_ms <= 50.0) throw EffectConfigError("echo delay must exceed 50 ms");
        if (feedback < 0.0 || feedback >= 1.0)
            throw EffectConfigError("echo feedback must be in [0, 1)");
    }
};

struct FlangerParams {
    double base_delay_ms = 3.0;
    double depth_ms = 2.0;
    double lfo_hz = 0.5;
    double feedback = 0.3;
    double wet = 0.7;
    double dry = 1.0;

    void validate() const {
        if (base_delay_ms - depth_ms < 0.0)
            throw EffectConfigError("flanger depth exceeds base delay");
        if (base_delay_ms + depth_ms >= 15.0)
            throw EffectConfigError("flanger delay must stay below 15 ms");
        if (feedback < 0.0 || feedback >= 1.0)
            throw EffectConfigError("flanger feedback must be in [0, 1)");
    }
};

struct ChorusVoice {
    double base_delay_ms = 30.0;
    double depth_ms = 3.0;
    double lfo_hz = 0.3;
    double lfo_phase = 0.0;
};

struct ChorusParams {
    std::vector<ChorusVoice> voices;
    double wet = 0.7;
    double dry = 1.0;

    void validate() const {
        if (voices.empty()) throw EffectConfigError("chorus needs at least one voice");
        for (const auto& v : voices) {
            if (v.base_delay_ms - v.depth_ms < 0.0)
                throw EffectConfigError("chorus depth exceeds base delay");
        }
    }
};

struct ReverbParams {
    double comb_delays_ms[4] = {29.7, 37.1, 41.1, 43.7};
    double allpass_delays_ms[2] = {5.0, 1.7};
    double rt60_s = 2.0;
    double wet = 0.5;
    double dry = 0.7;

    double comb_gain(double delay_ms) const {
        return std::pow(10.0, -3.0 * (delay_ms / 1000.0) / rt60_s);
    }

    void validate() const {
        if (rt60_s <= 0.0) throw EffectConfigError("reverb rt60 must be positive");
        for (double d : comb_delays_ms) {
            const double g = comb_gain(d);
            if (!(g > 0.0 && g < 1.0))
                throw EffectConfigError("reverb comb gain out of (0, 1)");
        }
    }
};

struct BitcrushParams {  // distortion, variant A
    int bit_depth = 8;
    int rate_divisor = 4;

    void validate() const {
        if (bit_depth < 1 || bit_depth > 16)
            throw EffectConfigError("bitcrush bit depth must be in [1, 16]");
        if (rate_divisor < 1) throw EffectConfigError("bitcrush rate divisor must be >= 1");
    }
};

struct OverdriveCompParams {  // distortion, variant B
    double drive = 5.0;
    double clip_threshold = 0.4;
    double makeup = 1.5;

    void validate() const {
        if (drive < 1.0) throw EffectConfigError("overdrive drive must be >= 1");
        if (clip_threshold <= 0.0 || clip_threshold > 1.0)
            throw EffectConfigError("overdrive clip threshold must be in (0, 1]");
    }
};

struct SaturationParams {
    double drive = 2.0;       // tanh shaping gain (variant A)
    bool cubic = false;       // variant B: cubic soft clipper instead of tanh

    void validate() const {
        if (drive <= 0.0) throw EffectConfigError("saturation drive must be positive");
    }
};

struct PitchShiftParams {
    int bins_per_octave = 72;
    int n_steps = 0;  // 0 = draw from seed in {1..5}
    int fft_size = 2048;
    int hop = 512;

    void validate() const {
        if (bins_per_octave <= 0) throw EffectConfigError("bins_per_octave must be positive");
        if (n_steps < 0 || n_steps > 5)
            throw EffectConfigError("pitch shift steps must be in {1..5} (0 = draw)");
        if (fft_size < 4 || (fft_size & (fft_size - 1)) != 0)
            throw EffectConfigError("pitch shift fft_size must be a power of two");
        if (hop <= 0 || hop > fft_size) throw EffectConfigError("bad pitch shift hop");
    }
};

using EffectParams = std::variant<EchoParams, FlangerParams, ChorusParams, ReverbParams,
                                  BitcrushParams, OverdriveCompParams, SaturationParams,
                                  PitchShiftParams>;

struct EffectConfig {
    EffectKind kind = EffectKind::kEcho;
    Variant variant = Variant::kA;
    EffectParams params;
    std::uint64_t seed = 0;  // consumed only by the pitch_shift step draw
};

/// Frozen defaults standing in for the unpublished plugin presets: variant A
/// feeds the training split, variant B validation/test.
inline EffectConfig default_effect_config(EffectKind kind, Variant variant,
                                          std::uint64_t seed = 0) {
    EffectConfig cfg;
    cfg.kind = kind;
    cfg.variant = variant;
    cfg.seed = seed;
    const bool a = (variant == Variant::kA);
    switch (kind) {
        case EffectKind::kEcho: {
            EchoParams p;
            if (!a) { p.delay_ms = 250.0; p.feedback = 0.4; }
            cfg.params = p;
            break;
        }
        case EffectKind::kFlanger: {
            FlangerParams p;
            if (!a) { p.base_delay_ms = 5.0; p.depth_ms = 3.0; p.lfo_hz = 0.25; p.feedback = 0.2; }
            cfg.params = p;
            break;
        }
        case EffectKind::kChorus: {
            ChorusParams p;
            if (a) {
                p.voices = {{25.0, 3.0, 0.3, 0.0}, {30.0, 3.0, 0.3, 0.0}, {35.0, 3.0, 0.3, 0.0}};
                for (std::size_t v = 0; v < p.voices.size(); ++v)
                    p.voices[v].lfo_phase = 2.0 * std::numbers::pi * static_cast<double>(v) / 3.0;
            } else {
                // single voice vintage chorus
                p.voices = {{30.0, 3.0, 0.5, 0.0}};
            }
            cfg.params = p;
            break;
        }
        case EffectKind::kReverb: {
            ReverbParams p;
            p.rt60_s = a ? 2.0 : 0.5;  // plate vs small room
            cfg.params = p;
            break;
        }
        case EffectKind::kBitcrushDistortion: {
            if (a) cfg.params = BitcrushParams{};
            else cfg.params = OverdriveCompParams{};
            break;
        }
        case EffectKind::kSaturation: {
            SaturationParams p;
            if (a) { p.drive = 2.0; p.cubic = false; }
            else   { p.drive = 1.5; p.cubic = true; }
            cfg.params = p;
            break;
        }
        case EffectKind::kPitchShift: {
            PitchShiftParams p;
            if (!a) p.n_steps = 3;  // fixed shift; A draws per example
            cfg.params = p;
            break;
        }
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Per-kind processors. Each takes and returns a full clip.

inline AudioClip echo(const AudioClip& in, const EchoParams& p) {
    p.validate();
    const auto delay = static_cast<std::size_t>(
        std::llround(p.delay_ms * in.sample_rate / 1000.0));
    AudioClip out;
    out.sample_rate = in.sample_rate;
    out.samples.resize(in.samples.size());
    std::vector<double> line(in.samples.size(), 0.0);  // e[n] = x[n-D] + fb*e[n-D]
    for (std::size_t n = 0; n < in.samples.size(); ++n) {
        double e = 0.0;
        if (n >= delay) e = in.samples[n - delay] + p.feedback * line[n - delay];
        line[n] = e;
        out.samples[n] = static_cast<float>(p.dry * in.samples[n] + p.wet * e);
    }
    return out;
}

namespace detail {

// Linear-interpolated read of buf at fractional index pos; out-of-range
// reads return 0 (before the signal starts).
inline double frac_read(const std::vector<double>& buf, double pos, std::size_t limit) {
    if (pos < 0.0) return 0.0;
    const auto i0 = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i0);
    if (i0 >= limit) return 0.0;
    const double a = buf[i0];
    const double b = (i0 + 1 < limit) ? buf[i0 + 1] : 0.0;
    return a + frac * (b - a);
}

}  // namespace detail

inline AudioClip flanger(const AudioClip& in, const FlangerParams& p) {
    p.validate();
    const double fs = in.sample_rate;
    AudioClip out;
    out.sample_rate = in.sample_rate;
    out.samples.resize(in.samples.size());
    // w holds the delay-line input x + fb * delayed(w)
    std::vector<double> w(in.samples.size(), 0.0);
    for (std::size_t n = 0; n < in.samples.size(); ++n) {
        const double d_ms =
            p.base_delay_ms + p.depth_ms * std::sin(2.0 * std::numbers::pi * p.lfo_hz *
                                                    static_cast<double>(n) / fs);
        const double d = d_ms * fs / 1000.0;
        const double delayed = detail::frac_read(w, static_cast<double>(n) - d, n);
        w[n] = in.samples[n] + p.feedback * delayed;
        out.samples[n] = static_cast<float>(p.dry * in.samples[n] + p.wet * delayed);
    }
    return out;
}

inline AudioClip chorus(const AudioClip& in, const ChorusParams& p) {
    p.validate();
    const double fs = in.sample_rate;
    AudioClip out;
    out.sample_rate = in.sample_rate;
    out.samples.resize(in.samples.size());
    std::vector<double> x(in.samples.begin(), in.samples.end());
    const double voice_gain = p.wet / static_cast<double>(p.voices.size());
    for (std::size_t n = 0; n < in.samples.size(); ++n) {
        double sum = 0.0;
        for (const auto& v : p.voices) {
            const double d_ms =
                v.base_delay_ms + v.depth_ms * std::sin(2.0 * std::numbers::pi * v.lfo_hz *
                                                            static_cast<double>(n) / fs +
                                                        v.lfo_phase);
            const double d = d_ms * fs / 1000.0;
            sum += detail::frac_read(x, static_cast<double>(n) - d, n + 1);
        }
        out.samples[n] = static_cast<float>(p.dry * x[n] + voice_gain * sum);
    }
    return out;
}

/// Schroeder topology: 4 parallel feedback combs (averaged), then 2 series
/// allpass sections with gain 0.7, mixed wet/dry.
inline AudioClip reverb(const AudioClip& in, const ReverbParams& p) {
    p.validate();
    const double fs = in.sample_rate;
    const std::size_t n = in.samples.size();
    std::vector<double> wet_sig(n, 0.0);

    for (double delay_ms : p.comb_delays_ms) {
        const auto delay = static_cast<std::size_t>(std::llround(delay_ms * fs / 1000.0));
        const double g = p.comb_gain(delay_ms);
        std::vector<double> y(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double v = in.samples[i];
            if (i >= delay) v += g * y[i - delay];
            y[i] = v;
            wet_sig[i] += 0.25 * v;
        }
    }

    constexpr double kAllpassGain = 0.7;
    for (double delay_ms : p.allpass_delays_ms) {
        const auto delay = static_cast<std::size_t>(std::llround(delay_ms * fs / 1000.0));
        std::vector<double> y(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double v = -kAllpassGain * wet_sig[i];
            if (i >= delay) v += wet_sig[i - delay] + kAllpassGain * y[i - delay];
            y[i] = v;
        }
        wet_sig.swap(y);
    }

    AudioClip out;
    out.sample_rate = in.sample_rate;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        out.samples[i] = static_cast<float>(p.dry * in.samples[i] + p.wet * wet_sig[i]);
    return out;
}

inline AudioClip bitcrush(const AudioClip& in, const BitcrushParams& p) {
    p.validate();
    AudioClip out;
    out.sample_rate = in.sample_rate;
    out.samples.resize(in.samples.size());
    const double levels = static_cast<double>((1 << (p.bit_depth - 1)) - 1);
    double held = 0.0;
    for (std::size_t n = 0; n < in.samples.size(); ++n) {
        if (n % static_cast<std::size_t>(p.rate_divisor) == 0) held = in.samples[n];
        double y = held;
        if (p.bit_depth < 17 && levels >= 1.0)
            y = std::round(y * levels) / levels;
        out.samples[n] = static_cast<float>(y);
    }
    return out;
}

inline AudioClip overdrive_comp(const AudioClip& in, const OverdriveCompParams& p) {
    p.validate();
    AudioClip out;
    out.sample_rate = in.sample_rate;
    out.samples.resize(in.samples.size());
    for (std::size_t n = 0; n < in.samples.size(); ++n) {
        const double u = std::clamp(p.drive * in.samples[n], -1.0, 1.0);
        const double shaped = std::clamp(1.5 * u - 0.5 * u * u * u, -1.0, 1.0);
        const double clipped = std::clamp(shaped, -p.clip_threshold, p.clip_threshold);
        out.samples[n] = static_cast<float>(p.makeup * clipped);
    }
    return out;
}

inline AudioClip saturate(const AudioClip& in, const SaturationParams& p) {
    p.validate();
    AudioClip out;
    out.sample_rate = in.sample_rate;
    out.samples.resize(in.samples.size());
    if (p.cubic) {
        for (std::size_t n = 0; n < in.samples.size(); ++n) {
            const double u = std::clamp(p.drive * in.samples[n], -1.0, 1.0);
            out.samples[n] = static_cast<float>(std::clamp(1.5 * u - 0.5 * u * u * u, -1.0, 1.0));
        }
    } else {
        // y = tanh(k x)/tanh(k): unit peak maps to unit peak
        const double norm = 1.0 / std::tanh(p.drive);
        for (std::size_t n = 0; n < in.samples.size(); ++n)
            out.samples[n] = static_cast<float>(std::tanh(p.drive * in.samples[n]) * norm);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Phase-vocoder pitch shift.

namespace detail {

/// Time-stretch by `stretch` (output duration = input * stretch) using the
/// standard magnitude-interpolation / phase-accumulation phase vocoder.
inline std::vector<double> phase_vocoder_stretch(const std::vector<double>& x, double stretch,
                                                 int fft_size, int hop) {
    const std::size_t n_fft = static_cast<std::size_t>(fft_size);
    const std::vector<double> window = hann_window(n_fft);

    // pad so edge content survives framing
    std::vector<double> padded(x.size() + 2 * n_fft, 0.0);
    std::copy(x.begin(), x.end(), padded.begin() + static_cast<std::ptrdiff_t>(n_fft));

    const int n_frames =
        static_cast<int>((padded.size() - n_fft) / static_cast<std::size_t>(hop)) + 1;
    const int n_bins = fft_size / 2 + 1;

    std::vector<std::vector<double>> mags(static_cast<std::size_t>(n_frames));
    std::vector<std::vector<double>> phases(static_cast<std::size_t>(n_frames));
    std::vector<std::complex<double>> buf(n_fft);
    for (int t = 0; t < n_frames; ++t) {
        const std::size_t off = static_cast<std::size_t>(t) * hop;
        for (std::size_t i = 0; i < n_fft; ++i) buf[i] = padded[off + i] * window[i];
        fft_inplace(buf);
        mags[static_cast<std::size_t>(t)].resize(static_cast<std::size_t>(n_bins));
        phases[static_cast<std::size_t>(t)].resize(static_cast<std::size_t>(n_bins));
        for (int k = 0; k < n_bins; ++k) {
            mags[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] =
                std::abs(buf[static_cast<std::size_t>(k)]);
            phases[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] =
                std::arg(buf[static_cast<std::size_t>(k)]);
        }
    }

    const double step = 1.0 / stretch;  // analysis frames advanced per synthesis frame
    std::vector<double> phase_acc = phases[0];
    std::vector<double> expected(static_cast<std::size_t>(n_bins));
    for (int k = 0; k < n_bins; ++k)
        expected[static_cast<std::size_t>(k)] =
            2.0 * std::numbers::pi * hop * k / static_cast<double>(fft_size);

    const int out_frames = static_cast<int>(std::floor((n_frames - 2) / step)) + 1;
    std::vector<double> out(static_cast<std::size_t>(out_frames - 1) * hop + n_fft, 0.0);
    std::vector<double> wsum(out.size(), 0.0);

    for (int t = 0; t < out_frames; ++t) {
        const double pos = t * step;
        const auto i0 = static_cast<std::size_t>(pos);
        const double alpha = pos - static_cast<double>(i0);
        const auto& m0 = mags[i0];
        const auto& m1 = mags[i0 + 1];
        const auto& p0 = phases[i0];
        const auto& p1 = phases[i0 + 1];

        for (int k = 0; k < n_bins; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            const double mag = (1.0 - alpha) * m0[ku] + alpha * m1[ku];
            buf[ku] = std::polar(mag, phase_acc[ku]);
        }
        for (int k = 1; k < n_bins - 1; ++k)  // hermitian half
            buf[n_fft - static_cast<std::size_t>(k)] = std::conj(buf[static_cast<std::size_t>(k)]);
        fft_inplace(buf, /*inverse=*/true);

        const std::size_t off = static_cast<std::size_t>(t) * hop;
        for (std::size_t i = 0; i < n_fft; ++i) {
            out[off + i] += buf[i].real() * window[i];
            wsum[off + i] += window[i] * window[i];
        }

        // advance phase by the wrapped instantaneous frequency
        for (int k = 0; k < n_bins; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            double dphi = p1[ku] - p0[ku] - expected[ku];
            dphi -= 2.0 * std::numbers::pi * std::round(dphi / (2.0 * std::numbers::pi));
            phase_acc[ku] += expected[ku] + dphi;
        }
    }

    for (std::size_t i = 0; i < out.size(); ++i)
        if (wsum[i] > 1e-9) out[i] /= wsum[i];

    // drop the analysis padding (scaled by the stretch factor)
    const auto lead = static_cast<std::size_t>(std::llround(n_fft * stretch));
    const auto want = static_cast<std::size_t>(std::llround(x.size() * stretch));
    std::vector<double> trimmed;
    trimmed.reserve(want);
    for (std::size_t i = 0; i < want && lead + i < out.size(); ++i)
        trimmed.push_back(out[lead + i]);
    trimmed.resize(want, 0.0);
    return trimmed;
}

}  // namespace detail

/// Shift pitch up by 2^(n_steps / bins_per_octave): phase-vocoder stretch by
/// the ratio, then linear-interpolation resample back to the original length.
/// n_steps == 0 draws uniformly from {1..5} using cfg seed.
inline AudioClip pitch_shift(const AudioClip& in, const PitchShiftParams& p,
                             std::uint64_t seed = 0) {
    p.validate();
    int steps = p.n_steps;
    if (steps == 0) {
        Rng rng(hash_combine(seed, 0x70766f63ULL));
        steps = static_cast<int>(rng.uniform_int(1, 5));
    }
    const double ratio = std::pow(2.0, static_cast<double>(steps) / p.bins_per_octave);

    std::vector<double> x(in.samples.begin(), in.samples.end());
    const std::vector<double> stretched =
        detail::phase_vocoder_stretch(x, ratio, p.fft_size, p.hop);

    AudioClip out;
    out.sample_rate = in.sample_rate;
    out.samples.resize(in.samples.size());
    for (std::size_t n = 0; n < out.samples.size(); ++n) {
        const double pos = static_cast<double>(n) * ratio;
        out.samples[n] =
            static_cast<float>(detail::frac_read(stretched, pos, stretched.size()));
    }
    return out;
}

// ---------------------------------------------------------------------------

/// Apply the configured effect and re-impose the 4 s length contract.
/// Deterministic given (clip, cfg) including cfg.seed.
inline AudioClip apply_effect(const AudioClip& clip, const EffectConfig& cfg) {
    AudioClip processed;
    switch (cfg.kind) {
        case EffectKind::kEcho:
            processed = echo(clip, std::get<EchoParams>(cfg.params));
            break;
        case EffectKind::kFlanger:
            processed = flanger(clip, std::get<FlangerParams>(cfg.params));
            break;
        case EffectKind::kChorus:
            processed = chorus(clip, std::get<ChorusParams>(cfg.params));
            break;
        case EffectKind::kReverb:
            processed = reverb(clip, std::get<ReverbParams>(cfg.params));
            break;
        case EffectKind::kBitcrushDistortion:
            if (std::holds_alternative<BitcrushParams>(cfg.params))
                processed = bitcrush(clip, std::get<BitcrushParams>(cfg.params));
            else
                processed = overdrive_comp(clip, std::get<OverdriveCompParams>(cfg.params));
            break;
        case EffectKind::kSaturation:
            processed = saturate(clip, std::get<SaturationParams>(cfg.params));
            break;
        case EffectKind::kPitchShift:
            processed = pitch_shift(clip, std::get<PitchShiftParams>(cfg.params), cfg.seed);
            break;
    }
    return fix_length(processed, 4.0);
}

}  // namespace fxclass
