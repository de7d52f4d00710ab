#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "fxclass/layers.hpp"
#include "fxclass/rng.hpp"
#include "fxclass/tensor.hpp"

namespace fxclass {

struct ConvGroupSpec {
    int filters;
    int height;
    int width;
};

/// Architecture description. The full preset is the single wide layer of
/// vertical filters; the gradcheck preset is a scaled-down copy small enough
/// for finite differences.
struct ModelConfig {
    int input_h = 80;
    int input_w = 247;
    int n_classes = 11;
    std::vector<ConvGroupSpec> groups = {
        {128, 5, 1}, {128, 8, 1}, {64, 5, 3}, {64, 80, 3}, {32, 5, 5}, {32, 80, 5},
    };
    double dropout_rate = 0.5;
    double bn_momentum = 0.9;
    double bn_eps = 1e-5;

    int total_channels() const {
        int c = 0;
        for (const auto& g : groups) c += g.filters;
        return c;
    }

    void validate() const {
        for (const auto& g : groups)
            if (g.height > input_h || g.width > input_w)
                throw std::invalid_argument("model: filter exceeds input size");
    }
};

inline ModelConfig full_model_config(int input_w = 247) {
    ModelConfig cfg;
    cfg.input_w = input_w;
    return cfg;
}

inline ModelConfig gradcheck_model_config() {
    ModelConfig cfg;
    cfg.input_h = 8;
    cfg.input_w = 8;
    cfg.groups = {{4, 3, 1}, {4, 2, 1}, {3, 3, 3}, {3, 8, 3}, {2, 3, 3}, {2, 8, 3}};
    return cfg;
}

template <typename T>
struct ModelParams {
    struct ConvGroup {
        Tensor<T> weight;     // (F, fh, fw)
        std::vector<T> bias;  // (F)
    };
    std::vector<ConvGroup> conv;
    std::vector<T> bn_scale, bn_shift;
    std::vector<T> bn_running_mean, bn_running_var;  // not trainable
    Tensor<T> dense_weight;   // (n_classes, C)
    std::vector<T> dense_bias;

    template <typename U>
    ModelParams<U> cast() const {
        ModelParams<U> out;
        out.conv.resize(conv.size());
        for (std::size_t i = 0; i < conv.size(); ++i) {
            out.conv[i].weight = conv[i].weight.template cast<U>();
            out.conv[i].bias.assign(conv[i].bias.begin(), conv[i].bias.end());
        }
        out.bn_scale.assign(bn_scale.begin(), bn_scale.end());
        out.bn_shift.assign(bn_shift.begin(), bn_shift.end());
        out.bn_running_mean.assign(bn_running_mean.begin(), bn_running_mean.end());
        out.bn_running_var.assign(bn_running_var.begin(), bn_running_var.end());
        out.dense_weight = dense_weight.template cast<U>();
        out.dense_bias.assign(dense_bias.begin(), dense_bias.end());
        return out;
    }
};

/// Visit every trainable flat buffer as (name, data pointer, length).
template <typename T, typename Fn>
void for_each_trainable(ModelParams<T>& p, Fn&& fn) {
    for (std::size_t g = 0; g < p.conv.size(); ++g) {
        fn("conv" + std::to_string(g) + ".weight", p.conv[g].weight.data.data(),
           p.conv[g].weight.data.size());
        fn("conv" + std::to_string(g) + ".bias", p.conv[g].bias.data(), p.conv[g].bias.size());
    }
    fn("bn.scale", p.bn_scale.data(), p.bn_scale.size());
    fn("bn.shift", p.bn_shift.data(), p.bn_shift.size());
    fn("dense.weight", p.dense_weight.data.data(), p.dense_weight.data.size());
    fn("dense.bias", p.dense_bias.data(), p.dense_bias.size());
}

template <typename T>
std::size_t trainable_param_count(const ModelConfig& cfg, ModelParams<T>& params) {
    (void)cfg;
    std::size_t n = 0;
    for_each_trainable(params, [&](const std::string&, T*, std::size_t len) { n += len; });
    return n;
}

/// He-style uniform init, bound sqrt(6 / fan_in); biases zero, BN scale 1.
template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ModelParams<T> p;
    Rng rng(hash_combine(seed, 0x696e6974ULL));
    p.conv.resize(cfg.groups.size());
    for (std::size_t g = 0; g < cfg.groups.size(); ++g) {
        const auto& spec = cfg.groups[g];
        p.conv[g].weight = Tensor<T>({spec.filters, spec.height, spec.width});
        const double bound = std::sqrt(6.0 / (spec.height * spec.width));
        for (T& w : p.conv[g].weight.data)
            w = static_cast<T>(rng.uniform(-bound, bound));
        p.conv[g].bias.assign(static_cast<std::size_t>(spec.filters), T(0));
    }
    const int c = cfg.total_channels();
    p.bn_scale.assign(static_cast<std::size_t>(c), T(1));
    p.bn_shift.assign(static_cast<std::size_t>(c), T(0));
    p.bn_running_mean.assign(static_cast<std::size_t>(c), T(0));
    p.bn_running_var.assign(static_cast<std::size_t>(c), T(1));
    p.dense_weight = Tensor<T>({cfg.n_classes, c});
    const double dense_bound = std::sqrt(6.0 / c);
    for (T& w : p.dense_weight.data) w = static_cast<T>(rng.uniform(-dense_bound, dense_bound));
    p.dense_bias.assign(static_cast<std::size_t>(cfg.n_classes), T(0));
    return p;
}

// ---------------------------------------------------------------------------
// Forward / backward for the whole model.

template <typename T>
struct ForwardTrace {
    Tensor<T> input;                          // (N, H, W)
    std::vector<BatchNormTrace<T>> bn;        // per group
    std::vector<Tensor<T>> elu_out;           // per group, post-activation maps
    std::vector<PoolResult<T>> pool;          // per group
    std::vector<T> pooled;                    // (N * C) pre-dropout
    std::vector<std::uint8_t> drop_mask;      // (N * C), train mode only
    std::vector<T> dropped;                   // (N * C) post-dropout
    std::vector<T> probs;                     // (N * K)
    int n_batch = 0;
    Mode mode = Mode::kEval;
};

/// Conv groups (conv -> BN -> ELU -> global max pool), concat, dropout,
/// dense softmax. Finite checks run on every stage output.
template <typename T>
std::vector<T> forward(const ModelConfig& cfg, ModelParams<T>& params, const Tensor<T>& batch,
                       Mode mode, std::type_identity_t<ForwardTrace<T>>* trace,
                       std::uint64_t dropout_seed = 0) {
    const int n_batch = batch.shape[0];
    const int c_total = cfg.total_channels();
    if (trace) {
        trace->input = batch;
        trace->bn.resize(cfg.groups.size());
        trace->elu_out.resize(cfg.groups.size());
        trace->pool.resize(cfg.groups.size());
        trace->n_batch = n_batch;
        trace->mode = mode;
    }
    check_finite(batch, "input");

    std::vector<T> pooled(static_cast<std::size_t>(n_batch) * c_total);
    int channel_offset = 0;
    for (std::size_t g = 0; g < cfg.groups.size(); ++g) {
        const std::string gname = "conv" + std::to_string(g);
        Tensor<T> z = conv2d_valid(batch, params.conv[g].weight, params.conv[g].bias);
        check_finite(z, gname + ".out");
        BatchNormTrace<T> local_bn;
        Tensor<T> bn_out = batch_norm(z, params.bn_scale, params.bn_shift,
                                      params.bn_running_mean, params.bn_running_var,
                                      channel_offset, mode, trace ? &local_bn : nullptr,
                                      cfg.bn_momentum, cfg.bn_eps);
        z.data.clear();
        for (T& v : bn_out.data) v = elu(v);
        check_finite(bn_out, gname + ".act");
        PoolResult<T> pr = global_max_pool(bn_out);
        const int f = cfg.groups[g].filters;
        for (int n = 0; n < n_batch; ++n)
            for (int j = 0; j < f; ++j)
                pooled[static_cast<std::size_t>(n) * c_total + channel_offset + j] =
                    pr.values[static_cast<std::size_t>(n) * f + j];
        if (trace) {
            trace->bn[g] = std::move(local_bn);
            trace->elu_out[g] = std::move(bn_out);
            trace->pool[g] = std::move(pr);
        }
        channel_offset += f;
    }
    check_finite(pooled, "pooled");

    std::vector<T> dropped = pooled;
    std::vector<std::uint8_t> mask;
    if (mode == Mode::kTrain && cfg.dropout_rate > 0.0) {
        mask = dropout_mask<T>(dropped.size(), cfg.dropout_rate, dropout_seed);
        dropout_apply(dropped, mask, cfg.dropout_rate);
    }

    std::vector<T> probs =
        dense_softmax(dropped, n_batch, params.dense_weight, params.dense_bias);
    check_finite(probs, "probs");

    if (trace) {
        trace->pooled = std::move(pooled);
        trace->drop_mask = std::move(mask);
        trace->dropped = std::move(dropped);
        trace->probs = probs;
    }
    return probs;
}

template <typename T>
struct Gradients {
    ModelParams<T> p;  // same layout as params; running stats unused
};

template <typename T>
Gradients<T> zero_gradients(const ModelConfig& cfg) {
    Gradients<T> g;
    g.p.conv.resize(cfg.groups.size());
    for (std::size_t i = 0; i < cfg.groups.size(); ++i) {
        const auto& spec = cfg.groups[i];
        g.p.conv[i].weight = Tensor<T>({spec.filters, spec.height, spec.width});
        g.p.conv[i].bias.assign(static_cast<std::size_t>(spec.filters), T(0));
    }
    const int c = cfg.total_channels();
    g.p.bn_scale.assign(static_cast<std::size_t>(c), T(0));
    g.p.bn_shift.assign(static_cast<std::size_t>(c), T(0));
    g.p.dense_weight = Tensor<T>({cfg.n_classes, c});
    g.p.dense_bias.assign(static_cast<std::size_t>(cfg.n_classes), T(0));
    return g;
}

/// Exact backpropagation through the trace for one batch.
template <typename T>
Gradients<T> backward(const ModelConfig& cfg, ModelParams<T>& params,
                      const ForwardTrace<T>& trace, const std::vector<int>& labels) {
    const int n_batch = trace.n_batch;
    const int c_total = cfg.total_channels();
    const int k = cfg.n_classes;
    Gradients<T> grads = zero_gradients<T>(cfg);

    // dense + softmax + cross entropy
    std::vector<T> dlogits = cross_entropy_logit_grad(trace.probs, labels, k);
    std::vector<T> dh(static_cast<std::size_t>(n_batch) * c_total, T(0));
    for (int n = 0; n < n_batch; ++n) {
        const T* hn = trace.dropped.data() + static_cast<std::size_t>(n) * c_total;
        const T* dl = dlogits.data() + static_cast<std::size_t>(n) * k;
        T* dhn = dh.data() + static_cast<std::size_t>(n) * c_total;
        for (int j = 0; j < k; ++j) {
            const T g = dl[j];
            grads.p.dense_bias[static_cast<std::size_t>(j)] += g;
            T* gw = grads.p.dense_weight.ptr() + static_cast<std::size_t>(j) * c_total;
            const T* wj = params.dense_weight.ptr() + static_cast<std::size_t>(j) * c_total;
            for (int i = 0; i < c_total; ++i) {
                gw[i] += g * hn[i];
                dhn[i] += g * wj[i];
            }
        }
    }

    // dropout
    if (trace.mode == Mode::kTrain && !trace.drop_mask.empty()) {
        const T keep_scale = static_cast<T>(1.0 / (1.0 - cfg.dropout_rate));
        for (std::size_t i = 0; i < dh.size(); ++i)
            dh[i] = trace.drop_mask[i] ? dh[i] * keep_scale : T(0);
    }

    // per group: pool -> ELU -> BN -> conv
    int channel_offset = 0;
    for (std::size_t g = 0; g < cfg.groups.size(); ++g) {
        const int f = cfg.groups[g].filters;
        const Tensor<T>& act = trace.elu_out[g];
        const std::size_t map =
            act.size() / (static_cast<std::size_t>(n_batch) * static_cast<std::size_t>(f));

        // gradient into the activation maps is nonzero only at argmax positions
        Tensor<T> dact;
        dact.shape = act.shape;
        dact.data.assign(act.size(), T(0));
        for (int n = 0; n < n_batch; ++n) {
            for (int j = 0; j < f; ++j) {
                const std::size_t nc = static_cast<std::size_t>(n) * f + j;
                const T gpool = dh[static_cast<std::size_t>(n) * c_total + channel_offset + j];
                const std::size_t pos = nc * map + trace.pool[g].argmax[nc];
                dact.data[pos] += gpool * elu_backward(act.data[pos]);
            }
        }

        Tensor<T> dz = batch_norm_backward(dact, trace.bn[g], params.bn_scale, channel_offset,
                                           grads.p.bn_scale, grads.p.bn_shift);
        conv2d_valid_backward(trace.input, params.conv[g].weight, dz, grads.p.conv[g].weight,
                              grads.p.conv[g].bias);
        check_finite(grads.p.conv[g].weight, "grad.conv" + std::to_string(g) + ".weight");
        channel_offset += f;
    }
    return grads;
}

// ---------------------------------------------------------------------------
// Adam.

template <typename T>
struct AdamState {
    std::map<std::string, std::vector<T>> m, v;
    std::int64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
void adam_step(ModelParams<T>& params, Gradients<T>& grads, AdamState<T>& state,
               double lr = 0.001) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    std::map<std::string, std::pair<T*, std::size_t>> grad_bufs;
    for_each_trainable(grads.p, [&](const std::string& name, T* ptr, std::size_t len) {
        grad_bufs[name] = {ptr, len};
    });
    for_each_trainable(params, [&](const std::string& name, T* p, std::size_t len) {
        auto it = grad_bufs.find(name);
        if (it == grad_bufs.end() || it->second.second != len)
            throw std::logic_error("adam: gradient/param mismatch for " + name);
        const T* g = it->second.first;
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.empty()) m.assign(len, T(0));
        if (v.empty()) v.assign(len, T(0));
        for (std::size_t i = 0; i < len; ++i) {
            m[i] = static_cast<T>(state.beta1 * m[i] + (1.0 - state.beta1) * g[i]);
            v[i] = static_cast<T>(state.beta2 * v[i] +
                                  (1.0 - state.beta2) * static_cast<double>(g[i]) * g[i]);
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + state.eps));
        }
    });
}

// ---------------------------------------------------------------------------
// Checkpoint I/O: magic "FXCK", u32 version, u64 tensor count, then per tensor
// u32 name length + name, u32 rank, u32 dims, f32 LE data. Adam state and BN
// running stats ride along so training resumes exactly.

struct CheckpointError : std::runtime_error {
    explicit CheckpointError(const std::string& what) : std::runtime_error("checkpoint: " + what) {}
};

namespace detail {

inline void ck_put_u32(std::ofstream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void ck_put_u64(std::ofstream& os, std::uint64_t v) {
    ck_put_u32(os, static_cast<std::uint32_t>(v & 0xffffffffULL));
    ck_put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint32_t ck_get_u32(std::ifstream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw CheckpointError("truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t ck_get_u64(std::ifstream& is) {
    const std::uint64_t lo = ck_get_u32(is);
    const std::uint64_t hi = ck_get_u32(is);
    return lo | (hi << 32);
}

inline void ck_write_tensor(std::ofstream& os, const std::string& name,
                            const std::vector<std::uint32_t>& dims, const float* data,
                            std::size_t len) {
    ck_put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    ck_put_u32(os, static_cast<std::uint32_t>(dims.size()));
    for (std::uint32_t d : dims) ck_put_u32(os, d);
    static_assert(sizeof(float) == 4);
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(len * 4));
}

}  // namespace detail

struct NamedTensorFile {
    std::map<std::string, std::pair<std::vector<std::uint32_t>, std::vector<float>>> tensors;
};

inline NamedTensorFile read_checkpoint_raw(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "FXCK", 4) != 0) throw CheckpointError("bad magic: " + path);
    const std::uint32_t version = detail::ck_get_u32(is);
    if (version != 1) throw CheckpointError("unsupported version");
    const std::uint64_t count = detail::ck_get_u64(is);
    NamedTensorFile out;
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = detail::ck_get_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const std::uint32_t rank = detail::ck_get_u32(is);
        std::vector<std::uint32_t> dims(rank);
        std::size_t len = 1;
        for (std::uint32_t& d : dims) {
            d = detail::ck_get_u32(is);
            len *= d;
        }
        std::vector<float> data(len);
        is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(len * 4));
        if (!is) throw CheckpointError("truncated tensor data: " + name);
        out.tensors[name] = {std::move(dims), std::move(data)};
    }
    return out;
}

template <typename T>
void save_checkpoint(const ModelConfig& cfg, ModelParams<T>& params, AdamState<T>* adam,
                     const std::string& path) {
    struct Entry {
        std::string name;
        std::vector<std::uint32_t> dims;
        std::vector<float> data;
    };
    std::vector<Entry> entries;
    auto add_vec = [&](const std::string& name, const std::vector<T>& v) {
        Entry e;
        e.name = name;
        e.dims = {static_cast<std::uint32_t>(v.size())};
        e.data.assign(v.begin(), v.end());
        entries.push_back(std::move(e));
    };
    for (std::size_t g = 0; g < params.conv.size(); ++g) {
        Entry e;
        e.name = "conv" + std::to_string(g) + ".weight";
        for (int d : params.conv[g].weight.shape) e.dims.push_back(static_cast<std::uint32_t>(d));
        e.data.assign(params.conv[g].weight.data.begin(), params.conv[g].weight.data.end());
        entries.push_back(std::move(e));
        add_vec("conv" + std::to_string(g) + ".bias", params.conv[g].bias);
    }
    add_vec("bn.scale", params.bn_scale);
    add_vec("bn.shift", params.bn_shift);
    add_vec("bn.running_mean", params.bn_running_mean);
    add_vec("bn.running_var", params.bn_running_var);
    {
        Entry e;
        e.name = "dense.weight";
        for (int d : params.dense_weight.shape) e.dims.push_back(static_cast<std::uint32_t>(d));
        e.data.assign(params.dense_weight.data.begin(), params.dense_weight.data.end());
        entries.push_back(std::move(e));
    }
    add_vec("dense.bias", params.dense_bias);
    if (adam) {
        Entry t;
        t.name = "adam.t";
        t.dims = {1};
        t.data = {static_cast<float>(adam->t)};
        entries.push_back(std::move(t));
        for (const auto& [name, m] : adam->m) {
            Entry e;
            e.name = "adam.m." + name;
            e.dims = {static_cast<std::uint32_t>(m.size())};
            e.data.assign(m.begin(), m.end());
            entries.push_back(std::move(e));
        }
        for (const auto& [name, v] : adam->v) {
            Entry e;
            e.name = "adam.v." + name;
            e.dims = {static_cast<std::uint32_t>(v.size())};
            e.data.assign(v.begin(), v.end());
            entries.push_back(std::move(e));
        }
    }
    (void)cfg;

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot write: " + path);
    os.write("FXCK", 4);
    detail::ck_put_u32(os, 1);
    detail::ck_put_u64(os, entries.size());
    for (const auto& e : entries)
        detail::ck_write_tensor(os, e.name, e.dims, e.data.data(), e.data.size());
    if (!os) throw CheckpointError("write failed: " + path);
}

template <typename T>
void load_checkpoint(const ModelConfig& cfg, ModelParams<T>& params, AdamState<T>* adam,
                     const std::string& path) {
    NamedTensorFile file = read_checkpoint_raw(path);
    auto take_vec = [&](const std::string& name, std::vector<T>& dst) {
        auto it = file.tensors.find(name);
        if (it == file.tensors.end()) throw CheckpointError("missing tensor: " + name);
        const auto& data = it->second.second;
        if (data.size() != dst.size())
            throw CheckpointError("shape mismatch for tensor: " + name);
        dst.assign(data.begin(), data.end());
    };
    params = init_params<T>(cfg, 0);
    for (std::size_t g = 0; g < params.conv.size(); ++g) {
        auto it = file.tensors.find("conv" + std::to_string(g) + ".weight");
        if (it == file.tensors.end()) throw CheckpointError("missing conv weights");
        if (it->second.second.size() != params.conv[g].weight.size())
            throw CheckpointError("conv weight shape mismatch");
        params.conv[g].weight.data.assign(it->second.second.begin(), it->second.second.end());
        take_vec("conv" + std::to_string(g) + ".bias", params.conv[g].bias);
    }
    take_vec("bn.scale", params.bn_scale);
    take_vec("bn.shift", params.bn_shift);
    take_vec("bn.running_mean", params.bn_running_mean);
    take_vec("bn.running_var", params.bn_running_var);
    {
        auto it = file.tensors.find("dense.weight");
        if (it == file.tensors.end()) throw CheckpointError("missing dense weights");
        if (it->second.second.size() != params.dense_weight.size())
            throw CheckpointError("dense weight shape mismatch");
        params.dense_weight.data.assign(it->second.second.begin(), it->second.second.end());
    }
    take_vec("dense.bias", params.dense_bias);
    if (adam) {
        auto it = file.tensors.find("adam.t");
        if (it != file.tensors.end()) {
            adam->t = static_cast<std::int64_t>(it->second.second.at(0));
            for (const auto& [name, tv] : file.tensors) {
                if (name.rfind("adam.m.", 0) == 0)
                    adam->m[name.substr(7)].assign(tv.second.begin(), tv.second.end());
                else if (name.rfind("adam.v.", 0) == 0)
                    adam->v[name.substr(7)].assign(tv.second.begin(), tv.second.end());
            }
        }
    }
}

}  // namespace fxclass
