#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fxclass/model.hpp"

namespace fxclass {

struct GradCheckReport {
    std::map<std::string, double> max_rel_error;  // per trainable tensor
    double worst = 0.0;

    bool passed(double tol = 1e-4) const { return worst < tol; }
};

/// Compare analytic gradients of the full model against central finite
/// differences. Intended for the scaled-down config in 64-bit mode; the
/// dropout mask is frozen by the seed so both routes see the same function.
inline GradCheckReport gradcheck_model(const ModelConfig& cfg, Tensor<double>& batch,
                                       const std::vector<int>& labels, std::uint64_t seed,
                                       double h = 1e-5) {
    ModelParams<double> params = init_params<double>(cfg, seed);
    const std::uint64_t dropout_seed = hash_combine(seed, 0x64726f70ULL);

    auto loss_of = [&](ModelParams<double>& p) {
        // running-stat updates do not feed the train-mode loss; restore them
        // anyway so repeated evaluations see identical state
        auto rm = p.bn_running_mean;
        auto rv = p.bn_running_var;
        std::vector<double> probs = forward(cfg, p, batch, Mode::kTrain, nullptr, dropout_seed);
        p.bn_running_mean = rm;
        p.bn_running_var = rv;
        return cross_entropy(probs, labels, cfg.n_classes);
    };

    ForwardTrace<double> trace;
    forward(cfg, params, batch, Mode::kTrain, &trace, dropout_seed);
    Gradients<double> grads = backward(cfg, params, trace, labels);

    std::map<std::string, std::pair<double*, std::size_t>> analytic;
    for_each_trainable(grads.p, [&](const std::string& name, double* ptr, std::size_t len) {
        analytic[name] = {ptr, len};
    });

    GradCheckReport report;
    for_each_trainable(params, [&](const std::string& name, double* p, std::size_t len) {
        const double* g = analytic.at(name).first;
        double worst = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            const double orig = p[i];
            p[i] = orig + h;
            const double lp = loss_of(params);
            p[i] = orig - h;
            const double lm = loss_of(params);
            p[i] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double denom = std::max({std::abs(fd), std::abs(g[i]), 1e-3});
            worst = std::max(worst, std::abs(fd - g[i]) / denom);
        }
        report.max_rel_error[name] = worst;
        report.worst = std::max(report.worst, worst);
    });
    return report;
}

/// Standard gradcheck instance: scaled-down config, deterministic random batch.
inline GradCheckReport run_standard_gradcheck(std::uint64_t seed = 7) {
    const ModelConfig cfg = gradcheck_model_config();
    Tensor<double> batch({2, cfg.input_h, cfg.input_w});
    Rng rng(hash_combine(seed, 0x6261746368ULL));
    for (double& v : batch.data) v = rng.uniform(-1.0, 1.0);
    const std::vector<int> labels = {3, 7};
    return gradcheck_model(cfg, batch, labels, seed);
}

}  // namespace fxclass
