#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <vector>

#include "fxclass/features.hpp"
#include "fxclass/toygen.hpp"

using namespace fxclass;
namespace fs = std::filesystem;

namespace {

ToySpec small_spec(std::uint64_t seed) {
    ToySpec spec;
    spec.per_class_train = 4;
    spec.per_class_valid = 2;
    spec.per_class_test = 2;
    spec.seed = seed;
    return spec;
}

std::string file_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("toygen defaults describe the 220/55/55 split") {
    const ToySpec spec;
    REQUIRE(spec.per_class_train * 11 == 220);
    REQUIRE(spec.per_class_valid * 11 == 55);
    REQUIRE(spec.per_class_test * 11 == 55);
    REQUIRE(spec.sample_rate == 16000);
    REQUIRE(spec.duration_s == 4.0);
}

TEST_CASE("toygen writes the requested counts with valid audio") {
    const fs::path dir = fs::temp_directory_path() / "fxclass_toygen_counts";
    fs::remove_all(dir);
    const DatasetManifest m = toygen(small_spec(1), dir.string());

    REQUIRE(m.rows.size() == 11 * 8);
    std::map<std::string, int> split_counts;
    std::map<int, int> label_counts;
    for (const auto& row : m.rows) {
        split_counts[row.split]++;
        label_counts[row.label]++;
        REQUIRE(row.effect == "none");
    }
    REQUIRE(split_counts["train"] == 44);
    REQUIRE(split_counts["valid"] == 22);
    REQUIRE(split_counts["test"] == 22);
    for (int c = 0; c < 11; ++c) REQUIRE(label_counts[c] == 8);

    // spot check: every clip is 4 s of nontrivial 16 kHz audio within [-1, 1]
    for (std::size_t i = 0; i < m.rows.size(); i += 17) {
        const AudioClip clip = load_wav(m.rows[i].path);
        REQUIRE(clip.sample_rate == 16000);
        REQUIRE(clip.samples.size() == 64000);
        double peak = 0.0;
        for (float s : clip.samples) peak = std::max(peak, std::abs(static_cast<double>(s)));
        REQUIRE(peak > 0.1);
        REQUIRE(peak <= 1.0);
    }
}

TEST_CASE("toygen is byte-identical across runs with the same seed") {
    const fs::path dir_a = fs::temp_directory_path() / "fxclass_toygen_a";
    const fs::path dir_b = fs::temp_directory_path() / "fxclass_toygen_b";
    const fs::path dir_c = fs::temp_directory_path() / "fxclass_toygen_c";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    fs::remove_all(dir_c);

    ToySpec spec = small_spec(5);
    spec.per_class_train = 1;
    spec.per_class_valid = 1;
    spec.per_class_test = 1;
    const DatasetManifest a = toygen(spec, dir_a.string());
    const DatasetManifest b = toygen(spec, dir_b.string());
    spec.seed = 6;
    const DatasetManifest c = toygen(spec, dir_c.string());

    REQUIRE(a.rows.size() == b.rows.size());
    bool any_differs_across_seeds = false;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        REQUIRE(a.rows[i].example_id == b.rows[i].example_id);
        REQUIRE(file_bytes(a.rows[i].path) == file_bytes(b.rows[i].path));
        if (file_bytes(a.rows[i].path) != file_bytes(c.rows[i].path))
            any_differs_across_seeds = true;
    }
    REQUIRE(any_differs_across_seeds);
}

TEST_CASE("toy classes are separable by 1-NN on mean log-mel vectors") {
    const fs::path dir = fs::temp_directory_path() / "fxclass_toygen_sep";
    fs::remove_all(dir);
    const DatasetManifest m = toygen(small_spec(3), dir.string());

    const Matrix fb = mel_filterbank();
    std::vector<std::vector<double>> embeddings;
    std::vector<int> labels;
    for (const auto& row : m.rows) {
        const AudioClip clip = load_wav(row.path);
        const LogMelSpectrogram lm = log_mel(clip, fb);
        std::vector<double> mean(static_cast<std::size_t>(lm.values.rows), 0.0);
        for (int r = 0; r < lm.values.rows; ++r) {
            double acc = 0.0;
            for (int c = 0; c < lm.values.cols; ++c) acc += lm.values.at(r, c);
            mean[static_cast<std::size_t>(r)] = acc / lm.values.cols;
        }
        embeddings.push_back(std::move(mean));
        labels.push_back(row.label);
    }

    // leave-one-out nearest neighbor in Euclidean distance
    std::size_t correct = 0;
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        double best = 1e300;
        std::size_t best_j = i;
        for (std::size_t j = 0; j < embeddings.size(); ++j) {
            if (j == i) continue;
            double d = 0.0;
            for (std::size_t k = 0; k < embeddings[i].size(); ++k) {
                const double diff = embeddings[i][k] - embeddings[j][k];
                d += diff * diff;
            }
            if (d < best) {
                best = d;
                best_j = j;
            }
        }
        if (labels[best_j] == labels[i]) ++correct;
    }
    const double accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
    INFO("1-NN accuracy " << accuracy);
    REQUIRE(accuracy >= 0.9);
}
