// Command-line front end: augment, featurize, train, evaluate, experiment,
// toygen and gradcheck subcommands over the fxclass library.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fxclass/augment.hpp"
#include "fxclass/experiment.hpp"
#include "fxclass/gradcheck.hpp"
#include "fxclass/manifest.hpp"
#include "fxclass/model.hpp"
#include "fxclass/nsynth.hpp"
#include "fxclass/pipeline.hpp"
#include "fxclass/toygen.hpp"

namespace {

constexpr const char* kVersion = "fxclass 1.0.0";

// exit codes: 0 ok, 1 usage/config, 2 data error, 3 numerical failure
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CommonOpts {
    std::uint64_t seed = 0;
    int jobs = static_cast<int>(std::thread::hardware_concurrency());
    std::string out = "out";
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--seed", opts.seed, "Random seed");
    cmd->add_option("--jobs", opts.jobs, "Parallel worker count");
    cmd->add_option("--out", opts.out, "Output directory");
    cmd->set_config("--config", "", "Flat key=value config file; flags override");
}

std::uint64_t config_hash(const CLI::App& cmd) {
    return fxclass::hash_string(cmd.config_to_str(true, false));
}

/// Every command leaves a run_log.json (seed, config hash, version, wall time)
/// beside its outputs.
class RunLog {
public:
    RunLog(const CLI::App& cmd, const CommonOpts& opts)
        : start_(std::chrono::steady_clock::now()), out_dir_(opts.out) {
        log_["command"] = cmd.get_name();
        log_["seed"] = opts.seed;
        log_["jobs"] = opts.jobs;
        log_["config_hash"] = config_hash(cmd);
        log_["version"] = kVersion;
    }

    void write() {
        const auto elapsed = std::chrono::duration<double>(
                                 std::chrono::steady_clock::now() - start_)
                                 .count();
        log_["wall_time_s"] = elapsed;
        std::filesystem::create_directories(out_dir_);
        std::ofstream os(std::filesystem::path(out_dir_) / "run_log.json", std::ios::trunc);
        os << log_.dump(2) << "\n";
    }

    nlohmann::json& json() { return log_; }

private:
    std::chrono::steady_clock::time_point start_;
    std::string out_dir_;
    nlohmann::json log_;
};

nlohmann::json metrics_to_json(const fxclass::Metrics& m) {
    nlohmann::json j;
    j["accuracy"] = m.accuracy;
    j["correct"] = m.correct;
    j["total"] = m.total;
    j["per_class_accuracy"] = m.per_class_accuracy;
    j["confusion"] = m.confusion;
    if (!m.train_loss.empty()) j["train_loss"] = m.train_loss;
    if (!m.valid_accuracy.empty()) j["valid_accuracy"] = m.valid_accuracy;
    return j;
}

fxclass::ModelConfig model_config_for(int time_stride) {
    return fxclass::full_model_config(fxclass::strided_width(247, time_stride));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Instrument-classification robustness pipeline"};
    app.require_subcommand(1);

    // ---- augment ----
    CommonOpts aug_opts;
    std::string aug_manifest, aug_effect, aug_split = "train";
    auto* aug = app.add_subcommand("augment", "Apply one effect to a manifest split");
    add_common(aug, aug_opts);
    aug->add_option("--manifest", aug_manifest, "Input manifest CSV")->required();
    aug->add_option("--effect", aug_effect,
                    "Effect kind (distortion|saturation|reverb|echo|flanger|chorus|pitch_shift)")
        ->required();
    aug->add_option("--split", aug_split,
                    "Split to process (train gets variant A, valid/test variant B)");

    // ---- featurize ----
    CommonOpts feat_opts;
    std::string feat_manifest;
    auto* feat = app.add_subcommand("featurize", "Compute log-mel feature files");
    add_common(feat, feat_opts);
    feat->add_option("--manifest", feat_manifest, "Input manifest CSV")->required();

    // ---- train ----
    CommonOpts train_opts;
    std::string train_manifest, valid_manifest;
    fxclass::TrainConfig tcfg;
    auto* trn = app.add_subcommand("train", "Train the classifier on feature manifests");
    add_common(trn, train_opts);
    trn->add_option("--train-manifest", train_manifest)->required();
    trn->add_option("--valid-manifest", valid_manifest)->required();
    trn->add_option("--lr", tcfg.lr, "Learning rate");
    trn->add_option("--batch-size", tcfg.batch_size);
    trn->add_option("--patience", tcfg.patience, "Early-stopping patience in epochs");
    trn->add_option("--max-epochs", tcfg.max_epochs);
    trn->add_option("--time-stride", tcfg.time_stride,
                    "Subsample feature frames by this stride (reduced-input training)");

    // ---- evaluate ----
    CommonOpts eval_opts;
    std::string eval_checkpoint, eval_manifest;
    int eval_stride = 1;
    auto* evl = app.add_subcommand("evaluate", "Evaluate a checkpoint on a feature manifest");
    add_common(evl, eval_opts);
    evl->add_option("--checkpoint", eval_checkpoint)->required();
    evl->add_option("--manifest", eval_manifest)->required();
    evl->add_option("--time-stride", eval_stride, "Must match the training stride");

    // ---- experiment ----
    CommonOpts exp_opts;
    bool exp_toy = false;
    std::string exp_manifest;
    std::string exp_effects;
    fxclass::TrainConfig exp_tcfg;
    fxclass::ToySpec exp_toy_spec;
    exp_tcfg.time_stride = 4;
    exp_tcfg.max_epochs = 40;
    auto* exp = app.add_subcommand("experiment", "Run the augmented-training grid");
    add_common(exp, exp_opts);
    exp->add_flag("--toy", exp_toy, "Generate and use the synthetic toy dataset");
    exp->add_option("--manifests", exp_manifest, "Clean dataset manifest CSV (wav paths)");
    exp->add_option("--effects", exp_effects, "Comma-separated effect list (default: all 7)");
    exp->add_option("--max-epochs", exp_tcfg.max_epochs);
    exp->add_option("--patience", exp_tcfg.patience);
    exp->add_option("--batch-size", exp_tcfg.batch_size);
    exp->add_option("--time-stride", exp_tcfg.time_stride);
    exp->add_option("--per-class-train", exp_toy_spec.per_class_train);
    exp->add_option("--per-class-valid", exp_toy_spec.per_class_valid);
    exp->add_option("--per-class-test", exp_toy_spec.per_class_test);

    // ---- toygen ----
    CommonOpts toy_opts;
    fxclass::ToySpec toy_spec;
    auto* toy = app.add_subcommand("toygen", "Generate the synthetic 11-class dataset");
    add_common(toy, toy_opts);
    toy->add_option("--per-class-train", toy_spec.per_class_train);
    toy->add_option("--per-class-valid", toy_spec.per_class_valid);
    toy->add_option("--per-class-test", toy_spec.per_class_test);

    // ---- gradcheck ----
    CommonOpts gc_opts;
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every layer");
    add_common(gc, gc_opts);

    // ---- ingest ----
    CommonOpts ing_opts;
    std::string ing_json, ing_wav_dir, ing_split = "train";
    auto* ing = app.add_subcommand("ingest", "Build a manifest from NSynth examples.json");
    add_common(ing, ing_opts);
    ing->add_option("--examples-json", ing_json)->required();
    ing->add_option("--wav-dir", ing_wav_dir)->required();
    ing->add_option("--split", ing_split);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    namespace fs = std::filesystem;
    try {
        if (aug->parsed()) {
            RunLog run_log(*aug, aug_opts);
            const fxclass::DatasetManifest manifest = fxclass::load_manifest(aug_manifest);
            const fxclass::EffectKind kind = fxclass::effect_kind_from_name(aug_effect);
            fxclass::AugmentResult result = fxclass::augment_dataset(
                manifest, kind, aug_split, (fs::path(aug_opts.out) / "wav").string(),
                aug_opts.seed, aug_opts.jobs);
            for (const auto& e : result.errors) std::cerr << "error: " << e << "\n";
            const std::string out_manifest =
                (fs::path(aug_opts.out) / "manifest.csv").string();
            fxclass::save_manifest(result.manifest, out_manifest);
            run_log.json()["errors"] = result.errors.size();
            run_log.json()["rows"] = result.manifest.rows.size();
            run_log.write();
            std::cout << "wrote " << result.manifest.rows.size() << " files, manifest "
                      << out_manifest << "\n";
        } else if (feat->parsed()) {
            RunLog run_log(*feat, feat_opts);
            const fxclass::DatasetManifest manifest = fxclass::load_manifest(feat_manifest);
            const fxclass::DatasetManifest out = fxclass::featurize_manifest(
                manifest, (fs::path(feat_opts.out) / "lmel").string());
            const std::string out_manifest =
                (fs::path(feat_opts.out) / "manifest.csv").string();
            fxclass::save_manifest(out, out_manifest);
            run_log.json()["rows"] = out.rows.size();
            run_log.write();
            std::cout << "wrote " << out.rows.size() << " feature files, manifest "
                      << out_manifest << "\n";
        } else if (trn->parsed()) {
            RunLog run_log(*trn, train_opts);
            tcfg.seed = train_opts.seed;
            const fxclass::DatasetManifest tm = fxclass::load_manifest(train_manifest);
            const fxclass::DatasetManifest vm = fxclass::load_manifest(valid_manifest);
            const fxclass::FeatureDataset train_ds =
                fxclass::load_feature_dataset(tm.split("train"));
            const fxclass::FeatureDataset valid_ds =
                fxclass::load_feature_dataset(vm.split("valid"));
            const fxclass::ModelConfig mcfg = model_config_for(tcfg.time_stride);
            fxclass::TrainResult result = fxclass::train(mcfg, train_ds, valid_ds, tcfg);
            fs::create_directories(train_opts.out);
            fxclass::save_checkpoint(mcfg, result.best_params,
                                     static_cast<fxclass::AdamState<float>*>(nullptr),
                                     (fs::path(train_opts.out) / "model.fxck").string());
            run_log.json()["metrics"] = metrics_to_json(result.metrics);
            run_log.json()["best_epoch"] = result.best_epoch;
            run_log.json()["epochs_run"] = result.epochs_run;
            run_log.json()["aborted_on_nan"] = result.aborted_on_nan;
            run_log.write();
            if (result.aborted_on_nan) {
                std::cerr << "training aborted on NaN; best checkpoint retained\n";
                return kExitNumeric;
            }
            std::cout << "best epoch " << result.best_epoch << ", validation accuracy "
                      << (result.metrics.valid_accuracy.empty()
                              ? 0.0
                              : result.metrics
                                    .valid_accuracy[static_cast<std::size_t>(
                                        result.best_epoch - 1)])
                      << "\n";
        } else if (evl->parsed()) {
            RunLog run_log(*evl, eval_opts);
            const fxclass::ModelConfig mcfg = model_config_for(eval_stride);
            fxclass::ModelParams<float> params;
            fxclass::load_checkpoint(mcfg, params,
                                     static_cast<fxclass::AdamState<float>*>(nullptr),
                                     eval_checkpoint);
            const fxclass::DatasetManifest manifest = fxclass::load_manifest(eval_manifest);
            fxclass::FeatureDataset ds = fxclass::load_feature_dataset(manifest.rows);
            fxclass::TrainConfig ecfg;
            ecfg.time_stride = eval_stride;
            const fxclass::Metrics metrics = fxclass::evaluate(mcfg, params, ds, ecfg);
            fs::create_directories(eval_opts.out);
            {
                std::ofstream os(fs::path(eval_opts.out) / "metrics.json", std::ios::trunc);
                os << metrics_to_json(metrics).dump(2) << "\n";
            }
            run_log.json()["accuracy"] = metrics.accuracy;
            run_log.write();
            std::cout << "accuracy " << metrics.accuracy << " (" << metrics.correct << "/"
                      << metrics.total << ")\n";
        } else if (exp->parsed()) {
            RunLog run_log(*exp, exp_opts);
            exp_tcfg.seed = exp_opts.seed;
            exp_toy_spec.seed = exp_opts.seed;
            fxclass::DatasetManifest clean;
            if (exp_toy) {
                clean = fxclass::toygen(exp_toy_spec,
                                        (fs::path(exp_opts.out) / "toy").string());
            } else if (!exp_manifest.empty()) {
                clean = fxclass::load_manifest(exp_manifest);
            } else {
                std::cerr << "experiment: need --toy or --manifests\n";
                return kExitUsage;
            }
            std::vector<fxclass::EffectKind> effects;
            if (exp_effects.empty()) {
                effects = fxclass::all_effect_kinds();
            } else {
                std::stringstream ss(exp_effects);
                std::string name;
                while (std::getline(ss, name, ','))
                    effects.push_back(fxclass::effect_kind_from_name(name));
            }
            const fxclass::ModelConfig mcfg = model_config_for(exp_tcfg.time_stride);
            const fxclass::ExperimentReport report = fxclass::experiment_grid(
                clean, effects, exp_opts.out, mcfg, exp_tcfg, std::cerr, exp_opts.jobs);
            fxclass::write_report_files(report, exp_opts.out);
            run_log.write();
            std::cout << "report written to " << exp_opts.out << "/report.json\n";
        } else if (toy->parsed()) {
            RunLog run_log(*toy, toy_opts);
            toy_spec.seed = toy_opts.seed;
            const fxclass::DatasetManifest manifest = fxclass::toygen(toy_spec, toy_opts.out);
            const std::string out_manifest = (fs::path(toy_opts.out) / "manifest.csv").string();
            fxclass::save_manifest(manifest, out_manifest);
            run_log.json()["rows"] = manifest.rows.size();
            run_log.write();
            std::cout << "wrote " << manifest.rows.size() << " examples, manifest "
                      << out_manifest << "\n";
        } else if (gc->parsed()) {
            RunLog run_log(*gc, gc_opts);
            const fxclass::GradCheckReport report =
                fxclass::run_standard_gradcheck(gc_opts.seed == 0 ? 7 : gc_opts.seed);
            for (const auto& [name, err] : report.max_rel_error)
                std::cout << name << " max relative error " << err << "\n";
            std::cout << "worst " << report.worst << "\n";
            run_log.json()["worst"] = report.worst;
            run_log.write();
            return report.passed() ? 0 : kExitNumeric;
        } else if (ing->parsed()) {
            RunLog run_log(*ing, ing_opts);
            const fxclass::DatasetManifest manifest =
                fxclass::ingest_nsynth(ing_json, ing_wav_dir, ing_split);
            fs::create_directories(ing_opts.out);
            const std::string out_manifest = (fs::path(ing_opts.out) / "manifest.csv").string();
            fxclass::save_manifest(manifest, out_manifest);
            run_log.json()["rows"] = manifest.rows.size();
            run_log.write();
            std::cout << "wrote manifest with " << manifest.rows.size() << " rows\n";
        }
    } catch (const fxclass::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}
