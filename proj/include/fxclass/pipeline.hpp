#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "fxclass/features.hpp"
#include "fxclass/manifest.hpp"
#include "fxclass/model.hpp"
#include "fxclass/rng.hpp"
#include "fxclass/tensor.hpp"

namespace fxclass {

// ---------------------------------------------------------------------------
// In-memory feature dataset.

struct FeatureDataset {
    std::vector<Matrix> features;  // one n_mels x n_frames matrix per example
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
};

/// Load every row's LMEL file. Labels come from the manifest.
inline FeatureDataset load_feature_dataset(const std::vector<ManifestRow>& rows) {
    FeatureDataset ds;
    ds.features.reserve(rows.size());
    ds.labels.reserve(rows.size());
    for (const auto& row : rows) {
        ds.features.push_back(load_features(row.path));
        ds.labels.push_back(row.label);
    }
    return ds;
}

/// Compute and write LMEL files for one manifest; returns the feature manifest.
inline DatasetManifest featurize_manifest(const DatasetManifest& manifest,
                                          const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const Matrix fb = mel_filterbank();
    DatasetManifest out;
    for (const auto& row : manifest.rows) {
        AudioClip clip = fix_length(load_wav(row.path), 4.0);
        const LogMelSpectrogram lm = log_mel(clip, fb);
        ManifestRow frow = row;
        const std::string tag = row.effect == "none" ? "" : "__" + row.effect;
        frow.path = (std::filesystem::path(out_dir) / (row.example_id + tag + ".lmel")).string();
        save_features(lm.values, static_cast<std::uint32_t>(row.label), frow.path);
        out.rows.push_back(std::move(frow));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Batching.

struct TrainConfig {
    double lr = 0.001;
    int batch_size = 50;
    int patience = 10;
    int max_epochs = 200;
    std::uint64_t seed = 0;
    int time_stride = 1;  // column subsampling of features fed to the model

    void validate() const {
        if (patience < 1) throw std::invalid_argument("train: patience must be >= 1");
        if (batch_size < 2) throw std::invalid_argument("train: batch size must be >= 2");
        if (time_stride < 1) throw std::invalid_argument("train: time stride must be >= 1");
    }
};

inline int strided_width(int n_frames, int stride) { return (n_frames - 1) / stride + 1; }

/// Epoch-wise reshuffled index batches. Training drops a trailing batch
/// smaller than 2 (batch-norm needs two examples); evaluation keeps it.
inline std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size,
                                                          std::uint64_t seed, int epoch,
                                                          bool training) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    if (training) {
        Rng rng(hash_combine(seed, static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = n; i > 1; --i)  // Fisher-Yates
            std::swap(order[i - 1],
                      order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t off = 0; off < n; off += static_cast<std::size_t>(batch_size)) {
        std::vector<std::size_t> b(order.begin() + static_cast<std::ptrdiff_t>(off),
                                   order.begin() +
                                       static_cast<std::ptrdiff_t>(std::min(
                                           off + static_cast<std::size_t>(batch_size), n)));
        if (training && b.size() < 2) continue;
        batches.push_back(std::move(b));
    }
    return batches;
}

/// Assemble a (N, H, W') input tensor, subsampling time frames by stride.
inline Tensor<float> assemble_batch(const FeatureDataset& ds,
                                    const std::vector<std::size_t>& idx, int stride,
                                    std::vector<int>* labels_out) {
    const Matrix& first = ds.features.at(idx.at(0));
    const int h = first.rows;
    const int w = strided_width(first.cols, stride);
    Tensor<float> batch({static_cast<int>(idx.size()), h, w});
    for (std::size_t n = 0; n < idx.size(); ++n) {
        const Matrix& m = ds.features[idx[n]];
        if (m.rows != h) throw std::invalid_argument("batch: inconsistent feature height");
        float* dst = batch.ptr() + n * static_cast<std::size_t>(h) * w;
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c)
                dst[static_cast<std::size_t>(r) * w + c] = m.at(r, c * stride);
    }
    if (labels_out) {
        labels_out->clear();
        for (std::size_t i : idx) labels_out->push_back(ds.labels[i]);
    }
    return batch;
}

// ---------------------------------------------------------------------------
// Early stopping: keep the best validation accuracy (earliest epoch on ties),
// stop after `patience` epochs without improvement.

class EarlyStopper {
public:
    explicit EarlyStopper(int patience) : patience_(patience) {}

    /// Feed one epoch's monitored value; returns true when training should stop.
    bool update(double value) {
        ++epoch_;
        if (value > best_value_) {  // strict: ties keep the earlier epoch
            best_value_ = value;
            best_epoch_ = epoch_;
        }
        return epoch_ - best_epoch_ >= patience_;
    }

    int best_epoch() const { return best_epoch_; }
    double best_value() const { return best_value_; }
    int epochs_seen() const { return epoch_; }

private:
    int patience_;
    int epoch_ = 0;
    int best_epoch_ = 0;
    double best_value_ = -1.0;
};

// ---------------------------------------------------------------------------
// Metrics.

struct Metrics {
    std::vector<double> train_loss;    // per epoch
    std::vector<double> valid_accuracy;  // per epoch
    double accuracy = 0.0;
    std::vector<double> per_class_accuracy;
    std::vector<std::vector<std::size_t>> confusion;  // [true][pred]
    std::size_t total = 0;
    std::size_t correct = 0;
};

/// Eval-mode forward over the whole dataset; prediction = argmax with ties to
/// the lowest index. accuracy == confusion trace / N by construction.
inline Metrics evaluate(const ModelConfig& cfg, ModelParams<float>& params,
                        const FeatureDataset& ds, const TrainConfig& tcfg) {
    const int k = cfg.n_classes;
    Metrics m;
    m.confusion.assign(static_cast<std::size_t>(k),
                       std::vector<std::size_t>(static_cast<std::size_t>(k), 0));
    const auto batches = make_batches(ds.size(), tcfg.batch_size, 0, 0, /*training=*/false);
    for (const auto& idx : batches) {
        std::vector<int> labels;
        Tensor<float> batch = assemble_batch(ds, idx, tcfg.time_stride, &labels);
        const std::vector<float> probs = forward(cfg, params, batch, Mode::kEval, nullptr);
        for (std::size_t n = 0; n < idx.size(); ++n) {
            const float* pn = probs.data() + n * static_cast<std::size_t>(k);
            int pred = 0;
            for (int j = 1; j < k; ++j)
                if (pn[j] > pn[pred]) pred = j;
            m.confusion[static_cast<std::size_t>(labels[n])][static_cast<std::size_t>(pred)]++;
        }
    }
    for (int t = 0; t < k; ++t) {
        std::size_t row_total = 0;
        for (int p = 0; p < k; ++p) row_total += m.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
        const std::size_t diag = m.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(t)];
        m.total += row_total;
        m.correct += diag;
        m.per_class_accuracy.push_back(
            row_total == 0 ? 0.0 : static_cast<double>(diag) / static_cast<double>(row_total));
    }
    m.accuracy = m.total == 0 ? 0.0 : static_cast<double>(m.correct) / static_cast<double>(m.total);
    return m;
}

struct TrainResult {
    ModelParams<float> best_params;
    Metrics metrics;
    int best_epoch = 0;
    int epochs_run = 0;
    bool aborted_on_nan = false;
};

/// Adam training with early stopping on validation categorical accuracy.
/// A NaN anywhere aborts the run; the best checkpoint so far is retained.
inline TrainResult train(const ModelConfig& cfg, const FeatureDataset& train_ds,
                         const FeatureDataset& valid_ds, const TrainConfig& tcfg) {
    tcfg.validate();
    cfg.validate();
    TrainResult result;
    ModelParams<float> params = init_params<float>(cfg, tcfg.seed);
    AdamState<float> adam;
    EarlyStopper stopper(tcfg.patience);
    result.best_params = params;

    for (int epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
        const auto batches =
            make_batches(train_ds.size(), tcfg.batch_size, tcfg.seed, epoch, /*training=*/true);
        double loss_sum = 0.0;
        std::size_t n_batches = 0;
        try {
            for (std::size_t bi = 0; bi < batches.size(); ++bi) {
                std::vector<int> labels;
                Tensor<float> batch = assemble_batch(train_ds, batches[bi], tcfg.time_stride, &labels);
                ForwardTrace<float> trace;
                const std::uint64_t drop_seed = hash_combine(
                    hash_combine(tcfg.seed, static_cast<std::uint64_t>(epoch)), bi);
                const std::vector<float> probs =
                    forward(cfg, params, batch, Mode::kTrain, &trace, drop_seed);
                loss_sum += cross_entropy(probs, labels, cfg.n_classes);
                ++n_batches;
                Gradients<float> grads = backward(cfg, params, trace, labels);
                adam_step(params, grads, adam, tcfg.lr);
            }
        } catch (const NumericError&) {
            result.aborted_on_nan = true;
            break;
        }
        result.metrics.train_loss.push_back(n_batches ? loss_sum / static_cast<double>(n_batches)
                                                      : 0.0);

        const Metrics val = evaluate(cfg, params, valid_ds, tcfg);
        result.metrics.valid_accuracy.push_back(val.accuracy);
        const bool improved = val.accuracy > stopper.best_value();
        const bool stop = stopper.update(val.accuracy);
        if (improved) result.best_params = params;
        result.epochs_run = epoch;
        if (stop) break;
    }
    result.best_epoch = stopper.best_epoch();
    return result;
}

}  // namespace fxclass
