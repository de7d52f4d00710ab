#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "fxclass/manifest.hpp"
#include "fxclass/rng.hpp"
#include "fxclass/wav.hpp"

namespace fxclass {

/// Synthetic 11-class dataset standing in for the real corpus at desk scale:
/// 4 s, 16 kHz mono clips, one synthesis recipe per instrument family,
/// randomized fundamental / amplitude / decay per example.
struct ToySpec {
    int per_class_train = 20;
    int per_class_valid = 5;
    int per_class_test = 5;
    int sample_rate = 16000;
    double duration_s = 4.0;
    std::uint64_t seed = 0;
};

namespace toy_detail {

struct Partial {
    double freq_ratio;  // multiple of f0 (or absolute when f0_relative is false)
    double amp;
    double decay_scale;  // per-partial decay speedup (1 = envelope as-is)
};

inline std::vector<float> render(const ToySpec& spec, int label, Rng& rng) {
    const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * spec.sample_rate));
    const double fs = spec.sample_rate;
    // per-family register: low basses, mid winds, high flutes/mallets
    static constexpr double kF0Range[11][2] = {
        {55.0, 110.0},   // bass
        {200.0, 320.0},  // brass
        {700.0, 990.0},  // flute
        {110.0, 220.0},  // guitar
        {310.0, 470.0},  // keyboard
        {640.0, 900.0},  // mallet
        {90.0, 150.0},   // organ
        {330.0, 470.0},  // reed
        {480.0, 640.0},  // string
        {480.0, 700.0},  // synth lead
        {130.0, 260.0},  // vocal
    };
    const double f0 = rng.uniform(kF0Range[label][0], kF0Range[label][1]);
    const double amp = rng.uniform(0.3, 0.9);

    std::vector<Partial> partials;
    double attack_s = 0.01;
    double decay_tau = 0.0;  // 0 = sustained
    double vibrato_hz = 0.0, vibrato_depth = 0.0;
    double tremolo_hz = 0.0, tremolo_depth = 0.0;
    double noise_amp = 0.0, noise_lp = 0.0;
    double fm_ratio = 0.0, fm_index = 0.0;

    switch (label) {
        case 0:  // bass: dark two-harmonic tone, slow decay
            partials = {{1.0, 1.0, 1.0}, {2.0, 0.4, 1.0}};
            decay_tau = rng.uniform(1.5, 3.0);
            break;
        case 1:  // brass: bright sawtooth-like stack, ramped attack
            for (int k = 1; k <= 10; ++k) partials.push_back({double(k), 1.0 / k, 1.0});
            attack_s = rng.uniform(0.05, 0.15);
            break;
        case 2:  // flute: near-pure tone plus breath noise
            partials = {{1.0, 1.0, 1.0}, {2.0, 0.15, 1.0}};
            noise_amp = 0.35;
            noise_lp = 0.15;
            break;
        case 3:  // guitar: plucked, upper harmonics die first
            for (int k = 1; k <= 8; ++k) partials.push_back({double(k), 1.0 / k, double(k)});
            decay_tau = rng.uniform(0.3, 0.8);
            attack_s = 0.003;
            break;
        case 4:  // keyboard: detuned pair, medium decay
            partials = {{1.0, 1.0, 1.0}, {1.003, 0.9, 1.0}, {3.0, 0.25, 1.5}};
            decay_tau = rng.uniform(0.8, 1.5);
            break;
        case 5:  // mallet: inharmonic partial, very fast decay
            partials = {{1.0, 1.0, 1.0}, {2.756, 0.6, 1.3}};
            decay_tau = rng.uniform(0.1, 0.3);
            attack_s = 0.002;
            break;
        case 6:  // organ: octave drawbars, sustained, slow tremolo
            partials = {{1.0, 1.0, 1.0}, {2.0, 0.8, 1.0}, {4.0, 0.6, 1.0}, {8.0, 0.5, 1.0}};
            tremolo_hz = 6.0;
            tremolo_depth = 0.2;
            break;
        case 7:  // reed: odd harmonics, square-ish
            for (int k = 1; k <= 9; k += 2) partials.push_back({double(k), 1.0 / k, 1.0});
            break;
        case 8:  // string: soft spectrum, slow attack, vibrato
            for (int k = 1; k <= 10; ++k) partials.push_back({double(k), 1.0 / (k * k), 1.0});
            attack_s = rng.uniform(0.15, 0.3);
            vibrato_hz = 5.0;
            vibrato_depth = 0.008;
            break;
        case 9:  // synth lead: FM pair
            fm_ratio = 2.33;
            fm_index = rng.uniform(2.0, 4.0);
            break;
        case 10:  // vocal: harmonics shaped by two fixed formants, vibrato
            for (int k = 1; k <= 12; ++k) {
                const double f = k * f0;
                const double w1 = std::exp(-0.5 * std::pow((f - 600.0) / 150.0, 2.0));
                const double w2 = std::exp(-0.5 * std::pow((f - 1400.0) / 250.0, 2.0));
                partials.push_back({double(k), 0.1 + w1 + 0.7 * w2, 1.0});
            }
            vibrato_hz = 5.5;
            vibrato_depth = 0.01;
            break;
        default:
            break;
    }

    std::vector<double> y(n, 0.0);
    if (fm_ratio > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / fs;
            y[i] = std::sin(2.0 * std::numbers::pi * f0 * t +
                            fm_index * std::sin(2.0 * std::numbers::pi * fm_ratio * f0 * t));
        }
    } else {
        for (const auto& p : partials) {
            const double f = p.freq_ratio * f0;
            if (f >= fs / 2.0) continue;
            double phase = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double t = static_cast<double>(i) / fs;
                const double vib =
                    1.0 + vibrato_depth * std::sin(2.0 * std::numbers::pi * vibrato_hz * t);
                phase += 2.0 * std::numbers::pi * f * vib / fs;
                double env = 1.0;
                if (decay_tau > 0.0) env = std::exp(-t * p.decay_scale / decay_tau);
                y[i] += p.amp * env * std::sin(phase);
            }
        }
    }

    if (noise_amp > 0.0) {
        double lp = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double white = rng.uniform(-1.0, 1.0);
            lp += noise_lp * (white - lp);  // 1-pole lowpass
            y[i] += noise_amp * lp;
        }
    }

    // shared envelope: attack ramp, optional tremolo, global decay for FM
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / fs;
        double env = t < attack_s ? t / attack_s : 1.0;
        if (tremolo_hz > 0.0)
            env *= 1.0 - tremolo_depth * 0.5 *
                             (1.0 + std::sin(2.0 * std::numbers::pi * tremolo_hz * t));
        y[i] *= env;
    }

    double peak = 0.0;
    for (double v : y) peak = std::max(peak, std::abs(v));
    const double gain = peak > 0.0 ? amp / peak : 0.0;
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(y[i] * gain);
    return out;
}

}  // namespace toy_detail

/// Generate the toy dataset under out_dir/wav and return its manifest.
/// Deterministic: every example derives its generator from (seed, example id).
inline DatasetManifest toygen(const ToySpec& spec, const std::string& out_dir) {
    const std::string wav_dir = (std::filesystem::path(out_dir) / "wav").string();
    std::filesystem::create_directories(wav_dir);

    DatasetManifest manifest;
    const struct {
        const char* split;
        int count;
    } splits[] = {
        {"train", spec.per_class_train},
        {"valid", spec.per_class_valid},
        {"test", spec.per_class_test},
    };
    for (int label = 0; label < 11; ++label) {
        const std::string& family = family_vocabulary()[static_cast<std::size_t>(label)];
        for (const auto& s : splits) {
            for (int i = 0; i < s.count; ++i) {
                const std::string id =
                    family + "_" + s.split + "_" + std::to_string(i);
                Rng rng(derive_seed(spec.seed, id));
                AudioClip clip;
                clip.sample_rate = spec.sample_rate;
                clip.samples = toy_detail::render(spec, label, rng);
                ManifestRow row;
                row.example_id = id;
                row.path = (std::filesystem::path(wav_dir) / (id + ".wav")).string();
                row.label = label;
                row.split = s.split;
                save_wav(clip, row.path);
                manifest.rows.push_back(std::move(row));
            }
        }
    }
    return manifest;
}

}  // namespace fxclass
