#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "fxclass/gradcheck.hpp"
#include "fxclass/layers.hpp"
#include "fxclass/model.hpp"
#include "fxclass/rng.hpp"

using namespace fxclass;

namespace {

Tensor<double> random_tensor(std::vector<int> shape, std::uint64_t seed, double lo = -1.0,
                             double hi = 1.0) {
    Tensor<double> t(std::move(shape));
    Rng rng(seed);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_CASE("conv2d_valid output shapes") {
    const Tensor<double> x = random_tensor({2, 80, 247}, 1);
    Tensor<double> w({3, 80, 3});
    std::vector<double> b(3, 0.0);
    const Tensor<double> y = conv2d_valid(x, w, b);
    REQUIRE(y.shape == std::vector<int>{2, 3, 1, 245});

    const Tensor<double> x2 = random_tensor({1, 80, 247}, 2);
    Tensor<double> w2({2, 5, 1});
    std::vector<double> b2(2, 0.0);
    REQUIRE(conv2d_valid(x2, w2, b2).shape == std::vector<int>{1, 2, 76, 247});
}

TEST_CASE("conv2d_valid with a 1x1 unit filter is the identity plus bias") {
    const Tensor<double> x = random_tensor({1, 6, 7}, 3);
    Tensor<double> w({1, 1, 1});
    w.data[0] = 1.0;
    const Tensor<double> y = conv2d_valid(x, w, std::vector<double>{0.25});
    REQUIRE(y.shape == std::vector<int>{1, 1, 6, 7});
    for (std::size_t i = 0; i < x.data.size(); ++i)
        REQUIRE(y.data[i] == Catch::Approx(x.data[i] + 0.25).margin(1e-12));
}

TEST_CASE("conv2d_valid with an all-ones 5x1 filter sums vertical windows") {
    Tensor<double> x({1, 8, 2});
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = static_cast<double>(i);
    Tensor<double> w({1, 5, 1});
    w.fill(1.0);
    const Tensor<double> y = conv2d_valid(x, w, std::vector<double>{0.0});
    REQUIRE(y.shape == std::vector<int>{1, 1, 4, 2});
    for (int oy = 0; oy < 4; ++oy) {
        for (int ox = 0; ox < 2; ++ox) {
            double expect = 0.0;
            for (int k = 0; k < 5; ++k) expect += x.data[static_cast<std::size_t>((oy + k) * 2 + ox)];
            REQUIRE(y.data[static_cast<std::size_t>(oy * 2 + ox)] == Catch::Approx(expect));
        }
    }
}

TEST_CASE("conv2d_valid_backward matches finite differences") {
    const Tensor<double> x = random_tensor({2, 6, 7}, 5);
    Tensor<double> w = random_tensor({2, 3, 2}, 6, -0.5, 0.5);
    std::vector<double> b = {0.1, -0.2};
    const Tensor<double> gy = random_tensor({2, 2, 4, 6}, 7);

    auto loss = [&](const Tensor<double>& weight, const std::vector<double>& bias) {
        const Tensor<double> y = conv2d_valid(x, weight, bias);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.data.size(); ++i) acc += y.data[i] * gy.data[i];
        return acc;
    };

    Tensor<double> gw;
    std::vector<double> gb;
    conv2d_valid_backward(x, w, gy, gw, gb);

    const double h = 1e-6;
    for (std::size_t i = 0; i < w.data.size(); ++i) {
        Tensor<double> wp = w, wm = w;
        wp.data[i] += h;
        wm.data[i] -= h;
        const double fd = (loss(wp, b) - loss(wm, b)) / (2.0 * h);
        REQUIRE(gw.data[i] == Catch::Approx(fd).margin(1e-6));
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
        auto bp = b, bm = b;
        bp[i] += h;
        bm[i] -= h;
        const double fd = (loss(w, bp) - loss(w, bm)) / (2.0 * h);
        REQUIRE(gb[i] == Catch::Approx(fd).margin(1e-6));
    }
}

TEST_CASE("batch_norm train mode normalizes to zero mean, unit variance") {
    const Tensor<double> x = random_tensor({4, 2, 3, 5}, 9, -3.0, 7.0);
    std::vector<double> scale(2, 1.0), shift(2, 0.0), rm(2, 0.0), rv(2, 1.0);
    BatchNormTrace<double> trace;
    const Tensor<double> y =
        batch_norm(x, scale, shift, rm, rv, 0, Mode::kTrain, &trace);
    const std::size_t map = 15;
    for (int c = 0; c < 2; ++c) {
        double sum = 0.0, sq = 0.0;
        for (int n = 0; n < 4; ++n) {
            const double* p = y.ptr() + (static_cast<std::size_t>(n) * 2 + c) * map;
            for (std::size_t i = 0; i < map; ++i) {
                sum += p[i];
                sq += p[i] * p[i];
            }
        }
        const double m = static_cast<double>(4 * map);
        REQUIRE(sum / m == Catch::Approx(0.0).margin(1e-10));
        REQUIRE(sq / m == Catch::Approx(1.0).margin(1e-4));  // biased var + eps
    }
    // running stats moved toward the batch stats with momentum 0.9
    REQUIRE(rm[0] == Catch::Approx(0.1 * trace.mean[0]).margin(1e-12));
}

TEST_CASE("batch_norm eval mode applies the affine form of the running stats") {
    Tensor<double> x({1, 1, 1, 3});
    x.data = {1.0, 2.0, 3.0};
    std::vector<double> scale = {2.0}, shift = {0.5}, rm = {1.5}, rv = {4.0};
    const Tensor<double> y =
        batch_norm(x, scale, shift, rm, rv, 0, Mode::kEval, nullptr);
    for (std::size_t i = 0; i < 3; ++i) {
        const double expect = 2.0 * (x.data[i] - 1.5) / std::sqrt(4.0 + 1e-5) + 0.5;
        REQUIRE(y.data[i] == Catch::Approx(expect).margin(1e-12));
    }
    REQUIRE(rm[0] == 1.5);  // eval never touches running stats
    REQUIRE(rv[0] == 4.0);
}

TEST_CASE("batch_norm rejects train batches smaller than 2") {
    Tensor<double> x({1, 1, 2, 2});
    std::vector<double> scale(1, 1.0), shift(1, 0.0), rm(1, 0.0), rv(1, 1.0);
    REQUIRE_THROWS_AS(batch_norm(x, scale, shift, rm, rv, 0, Mode::kTrain, nullptr),
                      std::invalid_argument);
}

TEST_CASE("batch_norm_backward matches finite differences") {
    const Tensor<double> x = random_tensor({3, 2, 2, 2}, 11);
    const Tensor<double> gy = random_tensor({3, 2, 2, 2}, 12);
    std::vector<double> scale = {1.3, 0.7}, shift = {0.1, -0.4};

    auto loss = [&](const Tensor<double>& input, const std::vector<double>& sc,
                    const std::vector<double>& sh) {
        std::vector<double> rm(2, 0.0), rv(2, 1.0);
        const Tensor<double> y = batch_norm(input, sc, sh, rm, rv, 0, Mode::kTrain, nullptr);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.data.size(); ++i) acc += y.data[i] * gy.data[i];
        return acc;
    };

    std::vector<double> rm(2, 0.0), rv(2, 1.0);
    BatchNormTrace<double> trace;
    batch_norm(x, scale, shift, rm, rv, 0, Mode::kTrain, &trace);
    std::vector<double> gsc(2, 0.0), gsh(2, 0.0);
    const Tensor<double> gx = batch_norm_backward(gy, trace, scale, 0, gsc, gsh);

    const double h = 1e-6;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        Tensor<double> xp = x, xm = x;
        xp.data[i] += h;
        xm.data[i] -= h;
        const double fd = (loss(xp, scale, shift) - loss(xm, scale, shift)) / (2.0 * h);
        REQUIRE(gx.data[i] == Catch::Approx(fd).margin(1e-5));
    }
    for (std::size_t i = 0; i < 2; ++i) {
        auto scp = scale, scm = scale;
        scp[i] += h;
        scm[i] -= h;
        REQUIRE(gsc[i] ==
                Catch::Approx((loss(x, scp, shift) - loss(x, scm, shift)) / (2.0 * h)).margin(1e-5));
        auto shp = shift, shm = shift;
        shp[i] += h;
        shm[i] -= h;
        REQUIRE(gsh[i] ==
                Catch::Approx((loss(x, scale, shp) - loss(x, scale, shm)) / (2.0 * h)).margin(1e-5));
    }
}

TEST_CASE("elu values and output-form derivative") {
    REQUIRE(elu(2.0) == 2.0);
    REQUIRE(elu(0.0) == 0.0);
    REQUIRE(elu(-1.0) == Catch::Approx(std::exp(-1.0) - 1.0).margin(1e-12));
    REQUIRE(elu_backward(3.0) == 1.0);
    // for x < 0: dy/dx = e^x = y + 1
    const double y = elu(-0.7);
    REQUIRE(elu_backward(y) == Catch::Approx(std::exp(-0.7)).margin(1e-12));
}

TEST_CASE("global_max_pool picks the max and the first occurrence on ties") {
    Tensor<double> x({1, 2, 2, 3});
    x.data = {0.1, 0.9, 0.3, 0.9, 0.2, 0.0,   // channel 0: tie at flat 1 and 3
              -5.0, -1.0, -2.0, -3.0, -4.0, -1.5};  // channel 1: max at flat 1
    const PoolResult<double> r = global_max_pool(x);
    REQUIRE(r.values == std::vector<double>{0.9, -1.0});
    REQUIRE(r.argmax == std::vector<std::size_t>{1, 1});
}

TEST_CASE("global_max_pool over the full channel stack") {
    const ModelConfig cfg = full_model_config();
    REQUIRE(cfg.total_channels() == 448);
    const Tensor<double> x = random_tensor({2, 448, 1, 5}, 13);
    const PoolResult<double> r = global_max_pool(x);
    REQUIRE(r.values.size() == 2 * 448);
    for (std::size_t nc = 0; nc < r.values.size(); ++nc) {
        double best = x.data[nc * 5];
        for (std::size_t i = 1; i < 5; ++i) best = std::max(best, x.data[nc * 5 + i]);
        REQUIRE(r.values[nc] == best);
    }
}

TEST_CASE("inverted dropout preserves the expectation and reproduces by seed") {
    const std::size_t n = 200000;
    std::vector<double> x(n, 1.0);
    const auto mask = dropout_mask<double>(n, 0.5, 99);
    dropout_apply(x, mask, 0.5);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    REQUIRE(mean == Catch::Approx(1.0).epsilon(0.02));
    for (double v : x) REQUIRE((v == 0.0 || v == 2.0));

    REQUIRE(dropout_mask<double>(1000, 0.5, 123) == dropout_mask<double>(1000, 0.5, 123));
    REQUIRE(dropout_mask<double>(1000, 0.5, 123) != dropout_mask<double>(1000, 0.5, 124));
}

TEST_CASE("dense_softmax gives uniform 1/11 for zero weights and is shift invariant") {
    Tensor<double> w({11, 4});
    std::vector<double> b(11, 0.0);
    const std::vector<double> h = {0.3, -0.2, 0.5, 1.0};
    const auto probs = dense_softmax(h, 1, w, b);
    REQUIRE(probs.size() == 11);
    for (double p : probs) REQUIRE(p == Catch::Approx(1.0 / 11.0).margin(1e-12));

    Rng rng(21);
    for (double& v : w.data) v = rng.uniform(-1.0, 1.0);
    for (double& v : b) v = rng.uniform(-1.0, 1.0);
    const auto p1 = dense_softmax(h, 1, w, b);
    for (double& v : b) v += 7.5;  // constant logit shift
    const auto p2 = dense_softmax(h, 1, w, b);
    for (std::size_t i = 0; i < p1.size(); ++i)
        REQUIRE(p2[i] == Catch::Approx(p1[i]).margin(1e-9));
}

TEST_CASE("cross entropy anchors") {
    std::vector<double> uniform(11, 1.0 / 11.0);
    REQUIRE(cross_entropy(uniform, {4}, 11) == Catch::Approx(std::log(11.0)).margin(1e-12));
    REQUIRE(std::log(11.0) == Catch::Approx(2.39790).margin(1e-4));

    std::vector<double> perfect(11, 0.0);
    perfect[2] = 1.0;
    REQUIRE(cross_entropy(perfect, {2}, 11) < 1e-6);

    // two-example batch: p(correct) = 0.5 and 0.25
    std::vector<double> probs(22, 0.0);
    probs[0 * 11 + 3] = 0.5;
    probs[1 * 11 + 8] = 0.25;
    REQUIRE(cross_entropy(probs, {3, 8}, 11) ==
            Catch::Approx(-(std::log(0.5) + std::log(0.25)) / 2.0).margin(1e-12));
    REQUIRE(cross_entropy(probs, {3, 8}, 11) == Catch::Approx(1.03972).margin(1e-5));
}

TEST_CASE("cross entropy logit gradient is (p - onehot)/N") {
    const std::vector<double> probs = {0.2, 0.5, 0.3, 0.1, 0.1, 0.8};
    const auto g = cross_entropy_logit_grad(probs, {1, 2}, 3);
    REQUIRE(g[0] == Catch::Approx(0.1));
    REQUIRE(g[1] == Catch::Approx((0.5 - 1.0) / 2.0));
    REQUIRE(g[2] == Catch::Approx(0.15));
    REQUIRE(g[5] == Catch::Approx((0.8 - 1.0) / 2.0));
}

TEST_CASE("adam leaves parameters unchanged for zero gradients") {
    const ModelConfig cfg = gradcheck_model_config();
    ModelParams<double> params = init_params<double>(cfg, 3);
    const ModelParams<double> before = params;
    Gradients<double> grads = zero_gradients<double>(cfg);
    AdamState<double> state;
    adam_step(params, grads, state, 0.001);
    REQUIRE(params.dense_weight.data == before.dense_weight.data);
    REQUIRE(params.conv[0].weight.data == before.conv[0].weight.data);
    REQUIRE(params.bn_scale == before.bn_scale);
}

TEST_CASE("adam first step with unit gradient moves a parameter by about -lr") {
    const ModelConfig cfg = gradcheck_model_config();
    ModelParams<double> params = init_params<double>(cfg, 3);
    const double before = params.dense_bias[0];
    Gradients<double> grads = zero_gradients<double>(cfg);
    grads.p.dense_bias[0] = 1.0;
    AdamState<double> state;
    adam_step(params, grads, state, 0.001);
    // mhat = 1, vhat = 1 -> step = lr / (1 + eps)
    REQUIRE(params.dense_bias[0] - before == Catch::Approx(-0.001).margin(1e-9));
    REQUIRE(state.t == 1);
}

TEST_CASE("full architecture has 37867 trainable parameters") {
    const ModelConfig cfg = full_model_config();
    ModelParams<float> params = init_params<float>(cfg, 0);
    REQUIRE(trainable_param_count(cfg, params) == 37867);
}

TEST_CASE("a zeroed classifier head yields exactly the uniform-guessing loss") {
    const ModelConfig cfg = full_model_config(62);  // narrow input, same architecture
    ModelParams<float> params = init_params<float>(cfg, 17);
    params.dense_weight.fill(0.0f);
    std::fill(params.dense_bias.begin(), params.dense_bias.end(), 0.0f);
    Tensor<float> batch({2, cfg.input_h, cfg.input_w});
    Rng rng(41);
    for (float& v : batch.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    const auto probs = forward(cfg, params, batch, Mode::kEval, nullptr);
    for (float p : probs) REQUIRE(p == Catch::Approx(1.0 / 11.0).margin(1e-6));
    const double loss = cross_entropy(probs, {0, 5}, cfg.n_classes);
    REQUIRE(loss == Catch::Approx(std::log(11.0)).margin(1e-4));
}

TEST_CASE("analytic gradients agree with finite differences across the model") {
    const GradCheckReport report = run_standard_gradcheck(7);
    INFO("worst relative error " << report.worst);
    REQUIRE(report.passed(1e-4));
    REQUIRE(report.max_rel_error.size() == 16);  // 6 conv pairs + bn pair + dense pair
}

TEST_CASE("checkpoints round-trip parameters and optimizer state") {
    const ModelConfig cfg = gradcheck_model_config();
    ModelParams<float> params = init_params<float>(cfg, 29);
    // one real training step so adam state and running stats are nontrivial
    Tensor<float> batch({2, cfg.input_h, cfg.input_w});
    Rng rng(30);
    for (float& v : batch.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    ForwardTrace<float> trace;
    forward(cfg, params, batch, Mode::kTrain, &trace, 55);
    Gradients<float> grads = backward(cfg, params, trace, {1, 9});
    AdamState<float> adam;
    adam_step(params, grads, adam, 0.001);

    const auto path =
        (std::filesystem::temp_directory_path() / "fxclass_test.fxck").string();
    save_checkpoint(cfg, params, &adam, path);

    ModelParams<float> re;
    AdamState<float> re_adam;
    load_checkpoint(cfg, re, &re_adam, path);
    for (std::size_t g = 0; g < params.conv.size(); ++g) {
        REQUIRE(re.conv[g].weight.data == params.conv[g].weight.data);
        REQUIRE(re.conv[g].bias == params.conv[g].bias);
    }
    REQUIRE(re.bn_scale == params.bn_scale);
    REQUIRE(re.bn_shift == params.bn_shift);
    REQUIRE(re.bn_running_mean == params.bn_running_mean);
    REQUIRE(re.bn_running_var == params.bn_running_var);
    REQUIRE(re.dense_weight.data == params.dense_weight.data);
    REQUIRE(re.dense_bias == params.dense_bias);
    REQUIRE(re_adam.t == 1);
    REQUIRE(re_adam.m.at("dense.bias") == adam.m.at("dense.bias"));
    REQUIRE(re_adam.v.at("conv0.weight") == adam.v.at("conv0.weight"));

    REQUIRE_THROWS_AS(load_checkpoint(cfg, re, &re_adam, "/nonexistent.fxck"), CheckpointError);
}

TEST_CASE("init is reproducible by seed and varies across seeds") {
    const ModelConfig cfg = gradcheck_model_config();
    const ModelParams<float> a = init_params<float>(cfg, 5);
    const ModelParams<float> b = init_params<float>(cfg, 5);
    const ModelParams<float> c = init_params<float>(cfg, 6);
    REQUIRE(a.conv[0].weight.data == b.conv[0].weight.data);
    REQUIRE(a.dense_weight.data == b.dense_weight.data);
    REQUIRE(a.conv[0].weight.data != c.conv[0].weight.data);
}

TEST_CASE("non-finite activations raise NumericError naming the stage") {
    const ModelConfig cfg = gradcheck_model_config();
    ModelParams<float> params = init_params<float>(cfg, 1);
    Tensor<float> batch({2, cfg.input_h, cfg.input_w});
    batch.data[3] = std::numeric_limits<float>::quiet_NaN();
    try {
        forward(cfg, params, batch, Mode::kEval, nullptr);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        REQUIRE(std::string(e.what()).find("input") != std::string::npos);
    }
}
