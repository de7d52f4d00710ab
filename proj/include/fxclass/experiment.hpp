#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fxclass/augment.hpp"
#include "fxclass/manifest.hpp"
#include "fxclass/model.hpp"
#include "fxclass/pipeline.hpp"

namespace fxclass {

/// One trained model of the grid, keyed by its training effect ("none" for
/// the clean baseline).
struct GridModel {
    std::string train_effect;
    Metrics train_metrics;
    int best_epoch = 0;
    int epochs_run = 0;
    bool failed = false;
    std::string error;
};

struct ExperimentReport {
    std::vector<std::string> effect_names;  // row/column order, "none" first
    std::vector<GridModel> models;
    // accuracy[train_effect][test_effect]; -1 marks a failed cell
    std::map<std::string, std::map<std::string, double>> accuracy;
};

/// Train the baseline plus one model per effect (clean + effect-augmented
/// train split) and evaluate every model on the clean and every
/// effect-processed test split.
///
/// `clean` must contain wav-backed rows for the train/valid/test splits.
/// Intermediate WAVs and LMEL files land under out_dir.
inline ExperimentReport experiment_grid(const DatasetManifest& clean,
                                        const std::vector<EffectKind>& effects,
                                        const std::string& out_dir, const ModelConfig& mcfg,
                                        const TrainConfig& tcfg,
                                        std::ostream& log = std::cerr, int jobs = 1) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    ExperimentReport report;
    report.effect_names.push_back("none");
    for (EffectKind k : effects) report.effect_names.push_back(effect_kind_name(k));

    log << "[experiment] featurizing clean splits\n";
    const DatasetManifest clean_feats =
        featurize_manifest(clean, (fs::path(out_dir) / "features" / "none").string());
    const FeatureDataset clean_train = load_feature_dataset(clean_feats.split("train"));
    const FeatureDataset clean_valid = load_feature_dataset(clean_feats.split("valid"));

    // Test sets for every column of the grid; augmented train/valid manifests
    // are kept on disk and loaded per model.
    std::map<std::string, FeatureDataset> test_sets;
    test_sets["none"] = load_feature_dataset(clean_feats.split("test"));

    const std::uint64_t aug_seed = hash_combine(tcfg.seed, hash_string("augment"));
    std::map<std::string, DatasetManifest> aug_feats;  // effect -> feature manifest
    for (EffectKind kind : effects) {
        const std::string name = effect_kind_name(kind);
        log << "[experiment] augmenting with " << name << "\n";
        const std::string aug_dir = (fs::path(out_dir) / "augmented" / name).string();
        DatasetManifest aug;
        for (const char* split : {"train", "valid", "test"}) {
            AugmentResult r = augment_dataset(clean, kind, split, aug_dir, aug_seed, jobs);
            for (const auto& e : r.errors) log << "[experiment] " << name << ": " << e << "\n";
            aug.rows.insert(aug.rows.end(), r.manifest.rows.begin(), r.manifest.rows.end());
        }
        const DatasetManifest feats =
            featurize_manifest(aug, (fs::path(out_dir) / "features" / name).string());
        test_sets[name] = load_feature_dataset(feats.split("test"));
        aug_feats[name] = feats;
    }

    auto evaluate_all = [&](ModelParams<float>& params, const std::string& train_effect) {
        for (const auto& test_name : report.effect_names) {
            const Metrics m = evaluate(mcfg, params, test_sets.at(test_name), tcfg);
            report.accuracy[train_effect][test_name] = m.accuracy;
        }
    };

    for (const auto& train_effect : report.effect_names) {
        GridModel gm;
        gm.train_effect = train_effect;
        log << "[experiment] training model: " << train_effect << "\n";
        try {
            FeatureDataset train_ds = clean_train;
            FeatureDataset valid_ds = clean_valid;
            if (train_effect != "none") {
                // clean + augmented, the 2x-size appended training set
                const FeatureDataset aug_train =
                    load_feature_dataset(aug_feats.at(train_effect).split("train"));
                const FeatureDataset aug_valid =
                    load_feature_dataset(aug_feats.at(train_effect).split("valid"));
                train_ds.features.insert(train_ds.features.end(), aug_train.features.begin(),
                                         aug_train.features.end());
                train_ds.labels.insert(train_ds.labels.end(), aug_train.labels.begin(),
                                       aug_train.labels.end());
                valid_ds.features.insert(valid_ds.features.end(), aug_valid.features.begin(),
                                         aug_valid.features.end());
                valid_ds.labels.insert(valid_ds.labels.end(), aug_valid.labels.begin(),
                                       aug_valid.labels.end());
            }
            TrainConfig model_tcfg = tcfg;
            model_tcfg.seed = hash_combine(tcfg.seed, hash_string(train_effect));
            TrainResult tr = train(mcfg, train_ds, valid_ds, model_tcfg);
            gm.train_metrics = tr.metrics;
            gm.best_epoch = tr.best_epoch;
            gm.epochs_run = tr.epochs_run;
            save_checkpoint(mcfg, tr.best_params, static_cast<AdamState<float>*>(nullptr),
                            (fs::path(out_dir) / ("model_" + train_effect + ".fxck")).string());
            evaluate_all(tr.best_params, train_effect);
        } catch (const std::exception& e) {
            gm.failed = true;
            gm.error = e.what();
            for (const auto& test_name : report.effect_names)
                report.accuracy[train_effect][test_name] = -1.0;
            log << "[experiment] model " << train_effect << " failed: " << e.what() << "\n";
        }
        report.models.push_back(std::move(gm));
    }
    return report;
}

inline nlohmann::json report_to_json(const ExperimentReport& report) {
    nlohmann::json j;
    j["effects"] = report.effect_names;
    nlohmann::json models = nlohmann::json::object();
    for (const auto& gm : report.models) {
        nlohmann::json m;
        m["train_loss"] = gm.train_metrics.train_loss;
        m["valid_accuracy"] = gm.train_metrics.valid_accuracy;
        m["best_epoch"] = gm.best_epoch;
        m["epochs_run"] = gm.epochs_run;
        m["failed"] = gm.failed;
        if (gm.failed) m["error"] = gm.error;
        models[gm.train_effect] = std::move(m);
    }
    j["models"] = std::move(models);
    j["accuracy_matrix"] = report.accuracy;
    return j;
}

/// table1.csv mirrors the clean-test column; table2.csv the per-effect test
/// rows (clean-trained vs matching augmented model).
inline void write_report_files(const ExperimentReport& report, const std::string& out_dir) {
    namespace fs = std::filesystem;
    {
        std::ofstream os(fs::path(out_dir) / "report.json", std::ios::trunc);
        os << report_to_json(report).dump(2) << "\n";
    }
    {
        std::ofstream os(fs::path(out_dir) / "table1.csv", std::ios::trunc);
        os << "test_effect,train_effect,accuracy\n";
        for (const auto& train_effect : report.effect_names)
            os << "none," << train_effect << ','
               << report.accuracy.at(train_effect).at("none") << '\n';
    }
    {
        std::ofstream os(fs::path(out_dir) / "table2.csv", std::ios::trunc);
        os << "test_effect,train_effect,accuracy\n";
        for (const auto& test_effect : report.effect_names) {
            if (test_effect == "none") continue;
            os << test_effect << ",none," << report.accuracy.at("none").at(test_effect) << '\n';
            os << test_effect << ',' << test_effect << ','
               << report.accuracy.at(test_effect).at(test_effect) << '\n';
        }
    }
}

}  // namespace fxclass
