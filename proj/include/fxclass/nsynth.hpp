#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <json.hpp>

#include "fxclass/manifest.hpp"

namespace fxclass {

/// Build a manifest from an NSynth-style examples.json (note id -> record with
/// an instrument-family string) plus the directory of per-note WAV files.
/// Notes without a WAV are reported and skipped; an unknown family is a hard
/// error since it would silently corrupt the label space.
inline DatasetManifest ingest_nsynth(const std::string& examples_json,
                                     const std::string& wav_dir, const std::string& split,
                                     std::ostream& warnings = std::cerr) {
    std::ifstream is(examples_json);
    if (!is) throw ManifestError("cannot open: " + examples_json);
    nlohmann::json doc;
    try {
        is >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ManifestError("bad JSON in " + examples_json + ": " + e.what());
    }
    if (!doc.is_object()) throw ManifestError("expected a JSON object: " + examples_json);
    if (doc.empty()) warnings << "warning: empty examples file: " << examples_json << "\n";

    DatasetManifest manifest;
    for (const auto& [id, record] : doc.items()) {
        std::string family;
        if (record.contains("instrument_family_str"))
            family = record["instrument_family_str"].get<std::string>();
        else if (record.contains("instrument_family"))
            family = record["instrument_family"].get<std::string>();
        else
            throw ManifestError("record " + id + " has no instrument-family field");

        ManifestRow row;
        row.example_id = id;
        row.label = family_label(family);  // throws on unknown family
        row.split = split;
        row.path = (std::filesystem::path(wav_dir) / (id + ".wav")).string();
        if (!std::filesystem::exists(row.path)) {
            warnings << "warning: missing wav for " << id << ", row skipped\n";
            continue;
        }
        manifest.rows.push_back(std::move(row));
    }
    return manifest;
}

}  // namespace fxclass
