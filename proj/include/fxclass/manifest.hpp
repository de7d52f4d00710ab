#pragma once

#include <array>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fxclass {

/// Fixed instrument-family vocabulary; label = index.
inline const std::array<std::string, 11>& family_vocabulary() {
    static const std::array<std::string, 11> names = {
        "bass", "brass",  "flute", "guitar", "keyboard",   "mallet",
        "organ", "reed", "string", "synth_lead", "vocal",
    };
    return names;
}

inline int family_label(const std::string& name) {
    const auto& vocab = family_vocabulary();
    for (std::size_t i = 0; i < vocab.size(); ++i)
        if (vocab[i] == name) return static_cast<int>(i);
    throw std::invalid_argument("unknown instrument family: " + name);
}

struct ManifestError : std::runtime_error {
    explicit ManifestError(const std::string& what) : std::runtime_error("manifest: " + what) {}
};

struct ManifestRow {
    std::string example_id;
    std::string path;  // wav or feature file
    int label = 0;     // 0..10
    std::string split; // train | valid | test
    std::string effect = "none";
};

struct DatasetManifest {
    std::vector<ManifestRow> rows;

    std::vector<ManifestRow> split(const std::string& name) const {
        std::vector<ManifestRow> out;
        for (const auto& r : rows)
            if (r.split == name) out.push_back(r);
        return out;
    }
};

inline void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ManifestError("cannot write: " + path);
    os << "example_id,path,label,split,effect\n";
    for (const auto& r : m.rows)
        os << r.example_id << ',' << r.path << ',' << r.label << ',' << r.split << ','
           << r.effect << '\n';
    if (!os) throw ManifestError("write failed: " + path);
}

inline DatasetManifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ManifestError("cannot open: " + path);
    DatasetManifest m;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (first) {
            first = false;
            if (!fields.empty() && fields[0] == "example_id") continue;  // header
        }
        if (fields.size() < 4) throw ManifestError("bad row in " + path + ": " + line);
        ManifestRow row;
        row.example_id = fields[0];
        row.path = fields[1];
        try {
            row.label = std::stoi(fields[2]);
        } catch (const std::exception&) {
            throw ManifestError("bad label in " + path + ": " + line);
        }
        if (row.label < 0 || row.label >= static_cast<int>(family_vocabulary().size()))
            throw ManifestError("label out of range in " + path + ": " + line);
        row.split = fields[3];
        if (row.split != "train" && row.split != "valid" && row.split != "test")
            throw ManifestError("bad split in " + path + ": " + line);
        row.effect = fields.size() > 4 ? fields[4] : "none";
        m.rows.push_back(std::move(row));
    }
    return m;
}

}  // namespace fxclass
