#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "fxclass/effects.hpp"
#include "fxclass/manifest.hpp"
#include "fxclass/rng.hpp"
#include "fxclass/wav.hpp"

namespace fxclass {

struct AugmentResult {
    DatasetManifest manifest;               // processed files, labels preserved
    std::vector<std::string> errors;        // per-file failures; the run continues
};

/// Process one split of a manifest with an effect: variant A for the train
/// split, variant B otherwise. Per-clip seeds derive from the example id, so
/// processing order (or parallelism) never changes the output.
inline AugmentResult augment_dataset(const DatasetManifest& manifest, EffectKind kind,
                                     const std::string& split, const std::string& out_dir,
                                     std::uint64_t seed, int jobs = 1) {
    std::filesystem::create_directories(out_dir);
    const Variant variant = (split == "train") ? Variant::kA : Variant::kB;
    const std::string effect_name = effect_kind_name(kind);
    const std::vector<ManifestRow> rows = manifest.split(split);

    std::vector<ManifestRow> out_rows(rows.size());
    std::vector<std::uint8_t> ok(rows.size(), 0);
    std::vector<std::string> errors(rows.size());

    auto process_one = [&](std::size_t i) {
        const ManifestRow& row = rows[i];
        try {
            AudioClip clip = load_wav(row.path);
            if (clip.sample_rate != 16000)
                throw std::runtime_error("sample rate " + std::to_string(clip.sample_rate) +
                                         " != 16000: " + row.path);
            clip = fix_length(clip, 4.0);
            EffectConfig cfg =
                default_effect_config(kind, variant, derive_seed(seed, row.example_id));
            const AudioClip processed = apply_effect(clip, cfg);

            ManifestRow out_row = row;
            out_row.effect = effect_name;
            out_row.path = (std::filesystem::path(out_dir) /
                            (row.example_id + "__" + effect_name + ".wav"))
                               .string();
            save_wav(processed, out_row.path);
            out_rows[i] = std::move(out_row);
            ok[i] = 1;
        } catch (const std::exception& e) {
            errors[i] = row.example_id + ": " + e.what();
        }
    };

    if (jobs <= 1 || rows.size() < 2) {
        for (std::size_t i = 0; i < rows.size(); ++i) process_one(i);
    } else {
        const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(jobs),
                                                            rows.size());
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t i = t; i < rows.size(); i += n_threads) process_one(i);
            });
        for (auto& th : pool) th.join();
    }

    AugmentResult result;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (ok[i]) result.manifest.rows.push_back(std::move(out_rows[i]));
        else result.errors.push_back(std::move(errors[i]));
    }
    return result;
}

}  // namespace fxclass
