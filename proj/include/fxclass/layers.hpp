#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "fxclass/rng.hpp"
#include "fxclass/tensor.hpp"

namespace fxclass {

// ---------------------------------------------------------------------------
// Valid (unpadded) cross-correlation, stride 1, single input channel.
// input (N, H, W), weight (F, fh, fw), bias (F) -> output (N, F, OH, OW).

template <typename T>
Tensor<T> conv2d_valid(const Tensor<T>& input, const Tensor<T>& weight,
                       const std::vector<T>& bias) {
    if (input.shape.size() != 3 || weight.shape.size() != 3)
        throw std::invalid_argument("conv2d: expected input (N,H,W), weight (F,fh,fw)");
    const int n_batch = input.shape[0], h = input.shape[1], w = input.shape[2];
    const int n_filt = weight.shape[0], fh = weight.shape[1], fw = weight.shape[2];
    if (fh > h || fw > w) throw std::invalid_argument("conv2d: filter larger than input");
    const int oh = h - fh + 1, ow = w - fw + 1;

    Tensor<T> out({n_batch, n_filt, oh, ow});
    const std::size_t in_plane = static_cast<std::size_t>(h) * w;
    const std::size_t out_map = static_cast<std::size_t>(oh) * ow;
    for (int n = 0; n < n_batch; ++n) {
        const T* x = input.ptr() + n * in_plane;
        for (int f = 0; f < n_filt; ++f) {
            const T* wf = weight.ptr() + static_cast<std::size_t>(f) * fh * fw;
            T* y = out.ptr() + (static_cast<std::size_t>(n) * n_filt + f) * out_map;
            const T b = bias[static_cast<std::size_t>(f)];
            for (int oy = 0; oy < oh; ++oy) {
                T* yrow = y + static_cast<std::size_t>(oy) * ow;
                for (int ox = 0; ox < ow; ++ox) yrow[ox] = b;
                for (int ky = 0; ky < fh; ++ky) {
                    const T* xrow = x + static_cast<std::size_t>(oy + ky) * w;
                    for (int kx = 0; kx < fw; ++kx) {
                        const T wv = wf[ky * fw + kx];
                        const T* xs = xrow + kx;
                        for (int ox = 0; ox < ow; ++ox) yrow[ox] += wv * xs[ox];
                    }
                }
            }
        }
    }
    return out;
}

/// Gradients of conv2d_valid w.r.t. weight and bias. The input here is the
/// first layer of the model, so no input gradient is produced.
template <typename T>
void conv2d_valid_backward(const Tensor<T>& input, const Tensor<T>& weight,
                           const Tensor<T>& grad_out, Tensor<T>& grad_weight,
                           std::vector<T>& grad_bias) {
    const int n_batch = input.shape[0], h = input.shape[1], w = input.shape[2];
    const int n_filt = weight.shape[0], fh = weight.shape[1], fw = weight.shape[2];
    const int oh = h - fh + 1, ow = w - fw + 1;
    grad_weight = Tensor<T>({n_filt, fh, fw});
    grad_bias.assign(static_cast<std::size_t>(n_filt), T(0));

    const std::size_t in_plane = static_cast<std::size_t>(h) * w;
    const std::size_t out_map = static_cast<std::size_t>(oh) * ow;
    for (int n = 0; n < n_batch; ++n) {
        const T* x = input.ptr() + n * in_plane;
        for (int f = 0; f < n_filt; ++f) {
            const T* gy = grad_out.ptr() + (static_cast<std::size_t>(n) * n_filt + f) * out_map;
            T* gw = grad_weight.ptr() + static_cast<std::size_t>(f) * fh * fw;
            T gb = T(0);
            for (int oy = 0; oy < oh; ++oy) {
                const T* gyrow = gy + static_cast<std::size_t>(oy) * ow;
                for (int ox = 0; ox < ow; ++ox) gb += gyrow[ox];
                for (int ky = 0; ky < fh; ++ky) {
                    const T* xrow = x + static_cast<std::size_t>(oy + ky) * w;
                    for (int kx = 0; kx < fw; ++kx) {
                        const T* xs = xrow + kx;
                        T acc = T(0);
                        for (int ox = 0; ox < ow; ++ox) acc += gyrow[ox] * xs[ox];
                        gw[ky * fw + kx] += acc;
                    }
                }
            }
            grad_bias[static_cast<std::size_t>(f)] += gb;
        }
    }
}

// ---------------------------------------------------------------------------
// Batch normalization over (batch, freq, time) per channel.

template <typename T>
struct BatchNormTrace {
    Tensor<T> xhat;              // normalized pre-scale activations
    std::vector<T> mean, inv_std;
};

enum class Mode { kTrain, kEval };

/// x (N, C, H, W); scale/shift/running stats indexed by channel_offset..+C.
/// Train mode normalizes by batch statistics (biased variance) and updates the
/// running stats with momentum 0.9.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const std::vector<T>& scale,
                     const std::vector<T>& shift, std::vector<T>& running_mean,
                     std::vector<T>& running_var, int channel_offset, Mode mode,
                     std::type_identity_t<BatchNormTrace<T>>* trace, double momentum = 0.9,
                     double eps = 1e-5) {
    const int n_batch = x.shape[0], c = x.shape[1];
    const std::size_t map = x.size() / (static_cast<std::size_t>(n_batch) * c);
    if (mode == Mode::kTrain && n_batch < 2)
        throw std::invalid_argument("batch_norm: train mode needs batch >= 2");

    Tensor<T> y;
    y.shape = x.shape;
    y.data.resize(x.size());
    if (trace) {
        trace->xhat.shape = x.shape;
        trace->xhat.data.resize(x.size());
        trace->mean.assign(static_cast<std::size_t>(c), T(0));
        trace->inv_std.assign(static_cast<std::size_t>(c), T(0));
    }

    const std::size_t m = static_cast<std::size_t>(n_batch) * map;  // elems per channel
    for (int ci = 0; ci < c; ++ci) {
        T mean, inv_std;
        const std::size_t g = static_cast<std::size_t>(channel_offset + ci);
        if (mode == Mode::kTrain) {
            double sum = 0.0, sq = 0.0;
            for (int n = 0; n < n_batch; ++n) {
                const T* p = x.ptr() + (static_cast<std::size_t>(n) * c + ci) * map;
                for (std::size_t i = 0; i < map; ++i) {
                    sum += p[i];
                    sq += static_cast<double>(p[i]) * p[i];
                }
            }
            const double mu = sum / static_cast<double>(m);
            const double var = std::max(sq / static_cast<double>(m) - mu * mu, 0.0);
            mean = static_cast<T>(mu);
            inv_std = static_cast<T>(1.0 / std::sqrt(var + eps));
            running_mean[g] = static_cast<T>(momentum * running_mean[g] + (1.0 - momentum) * mu);
            running_var[g] = static_cast<T>(momentum * running_var[g] + (1.0 - momentum) * var);
        } else {
            mean = running_mean[g];
            inv_std = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[g]) + eps));
        }
        const T sc = scale[g], sh = shift[g];
        for (int n = 0; n < n_batch; ++n) {
            const std::size_t off = (static_cast<std::size_t>(n) * c + ci) * map;
            const T* p = x.ptr() + off;
            T* q = y.ptr() + off;
            T* xh = trace ? trace->xhat.ptr() + off : nullptr;
            for (std::size_t i = 0; i < map; ++i) {
                const T v = (p[i] - mean) * inv_std;
                if (xh) xh[i] = v;
                q[i] = sc * v + sh;
            }
        }
        if (trace) {
            trace->mean[static_cast<std::size_t>(ci)] = mean;
            trace->inv_std[static_cast<std::size_t>(ci)] = inv_std;
        }
    }
    return y;
}

/// Backward through train-mode batch norm. grad_out and the returned grad_x
/// have the shape of the forward activations.
template <typename T>
Tensor<T> batch_norm_backward(const Tensor<T>& grad_out, const BatchNormTrace<T>& trace,
                              const std::vector<T>& scale, int channel_offset,
                              std::vector<T>& grad_scale, std::vector<T>& grad_shift) {
    const int n_batch = grad_out.shape[0], c = grad_out.shape[1];
    const std::size_t map = grad_out.size() / (static_cast<std::size_t>(n_batch) * c);
    const std::size_t m = static_cast<std::size_t>(n_batch) * map;

    Tensor<T> grad_x;
    grad_x.shape = grad_out.shape;
    grad_x.data.resize(grad_out.size());

    for (int ci = 0; ci < c; ++ci) {
        const std::size_t g = static_cast<std::size_t>(channel_offset + ci);
        const T sc = scale[g];
        const T inv_std = trace.inv_std[static_cast<std::size_t>(ci)];
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int n = 0; n < n_batch; ++n) {
            const std::size_t off = (static_cast<std::size_t>(n) * c + ci) * map;
            const T* dy = grad_out.ptr() + off;
            const T* xh = trace.xhat.ptr() + off;
            for (std::size_t i = 0; i < map; ++i) {
                sum_dy += dy[i];
                sum_dy_xhat += static_cast<double>(dy[i]) * xh[i];
            }
        }
        grad_shift[g] += static_cast<T>(sum_dy);
        grad_scale[g] += static_cast<T>(sum_dy_xhat);
        const double mean_dy = sum_dy / static_cast<double>(m);
        const double mean_dy_xhat = sum_dy_xhat / static_cast<double>(m);
        for (int n = 0; n < n_batch; ++n) {
            const std::size_t off = (static_cast<std::size_t>(n) * c + ci) * map;
            const T* dy = grad_out.ptr() + off;
            const T* xh = trace.xhat.ptr() + off;
            T* dx = grad_x.ptr() + off;
            for (std::size_t i = 0; i < map; ++i)
                dx[i] = static_cast<T>(sc * inv_std *
                                       (dy[i] - mean_dy - xh[i] * mean_dy_xhat));
        }
    }
    return grad_x;
}

// ---------------------------------------------------------------------------
// ELU (alpha = 1).

template <typename T>
T elu(T x) {
    return x > T(0) ? x : static_cast<T>(std::expm1(static_cast<double>(x)));
}

/// Derivative expressed through the output: 1 for y > 0, y + 1 otherwise.
template <typename T>
T elu_backward(T y) {
    return y > T(0) ? T(1) : y + T(1);
}

// ---------------------------------------------------------------------------
// Global max pool: one scalar per (example, channel), argmax traced for the
// backward pass; ties resolve to the first occurrence in row-major order.

template <typename T>
struct PoolResult {
    std::vector<T> values;            // (N * C)
    std::vector<std::size_t> argmax;  // flat index into the channel map
};

template <typename T>
PoolResult<T> global_max_pool(const Tensor<T>& x) {
    const int n_batch = x.shape[0], c = x.shape[1];
    const std::size_t map = x.size() / (static_cast<std::size_t>(n_batch) * c);
    PoolResult<T> out;
    out.values.resize(static_cast<std::size_t>(n_batch) * c);
    out.argmax.resize(out.values.size());
    for (std::size_t nc = 0; nc < out.values.size(); ++nc) {
        const T* p = x.ptr() + nc * map;
        T best = p[0];
        std::size_t best_i = 0;
        for (std::size_t i = 1; i < map; ++i) {
            if (p[i] > best) {
                best = p[i];
                best_i = i;
            }
        }
        out.values[nc] = best;
        out.argmax[nc] = best_i;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Inverted dropout on the pooled feature vector.

template <typename T>
std::vector<std::uint8_t> dropout_mask(std::size_t n, double rate, std::uint64_t seed) {
    std::vector<std::uint8_t> mask(n);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) mask[i] = rng.next_double() >= rate ? 1 : 0;
    return mask;
}

template <typename T>
void dropout_apply(std::vector<T>& x, const std::vector<std::uint8_t>& mask, double rate) {
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = mask[i] ? x[i] * keep_scale : T(0);
}

// ---------------------------------------------------------------------------
// Dense layer + stable softmax + categorical cross-entropy.

/// h (N, C) flattened, weight (K, C), bias (K) -> probabilities (N, K).
template <typename T>
std::vector<T> dense_softmax(const std::vector<T>& h, int n_batch, const Tensor<T>& weight,
                             const std::vector<T>& bias, std::vector<T>* logits_out = nullptr) {
    const int k = weight.shape[0], c = weight.shape[1];
    std::vector<T> probs(static_cast<std::size_t>(n_batch) * k);
    std::vector<T> logits(static_cast<std::size_t>(n_batch) * k);
    for (int n = 0; n < n_batch; ++n) {
        const T* hn = h.data() + static_cast<std::size_t>(n) * c;
        T* ln = logits.data() + static_cast<std::size_t>(n) * k;
        for (int j = 0; j < k; ++j) {
            const T* wj = weight.ptr() + static_cast<std::size_t>(j) * c;
            T acc = bias[static_cast<std::size_t>(j)];
            for (int i = 0; i < c; ++i) acc += wj[i] * hn[i];
            ln[j] = acc;
        }
        T mx = ln[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, ln[j]);
        T sum = T(0);
        T* pn = probs.data() + static_cast<std::size_t>(n) * k;
        for (int j = 0; j < k; ++j) {
            pn[j] = static_cast<T>(std::exp(static_cast<double>(ln[j] - mx)));
            sum += pn[j];
        }
        for (int j = 0; j < k; ++j) pn[j] /= sum;
    }
    if (logits_out) *logits_out = std::move(logits);
    return probs;
}

/// loss = -(1/N) sum ln p[correct]; clamped at the feature floor to keep the
/// loss finite when a probability underflows.
template <typename T>
double cross_entropy(const std::vector<T>& probs, const std::vector<int>& labels, int n_classes) {
    const std::size_t n = labels.size();
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = std::max(
            static_cast<double>(probs[i * static_cast<std::size_t>(n_classes) +
                                      static_cast<std::size_t>(labels[i])]),
            1e-300);
        loss -= std::log(p);
    }
    return loss / static_cast<double>(n);
}

/// d loss / d logits = (probs - onehot) / N.
template <typename T>
std::vector<T> cross_entropy_logit_grad(const std::vector<T>& probs,
                                        const std::vector<int>& labels, int n_classes) {
    std::vector<T> grad(probs);
    const std::size_t n = labels.size();
    const T inv_n = static_cast<T>(1.0 / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        grad[i * static_cast<std::size_t>(n_classes) + static_cast<std::size_t>(labels[i])] -=
            T(1);
    for (T& g : grad) g *= inv_n;
    return grad;
}

}  // namespace fxclass
