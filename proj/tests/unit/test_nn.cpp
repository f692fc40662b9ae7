#include "doctest.h"

#include <cmath>
#include <fstream>

#include "finite_diff.hpp"
#include "temp_dir.hpp"
#include "vibfault/errors.hpp"
#include "vibfault/nn.hpp"
#include "vibfault/rng.hpp"

using namespace vibfault;
using namespace vibfault::nn;

namespace {

using DTensor = TensorT<double>;

DTensor random_tensor(Rng& rng, std::vector<std::size_t> dims, double lo = -1.0, double hi = 1.0) {
    auto t = DTensor::zeros(std::move(dims));
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

} // namespace

TEST_CASE("conv2d forward fixtures") {
    auto x = DTensor::zeros({1, 3, 3});
    std::fill(x.data.begin(), x.data.end(), 1.0);
    auto w = DTensor::zeros({1, 1, 2, 2});
    std::fill(w.data.begin(), w.data.end(), 1.0);
    auto b = DTensor::zeros({1});
    const auto y = conv2d_forward(x, w, b);
    CHECK(y.dims == std::vector<std::size_t>{1, 2, 2});
    for (double v : y.data) CHECK(v == 4.0);

    DTensor x2({1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
    DTensor w2({1, 1, 1, 1}, {2.0});
    const auto y2 = conv2d_forward(x2, w2, b);
    CHECK(y2.data == std::vector<double>{2.0, 4.0, 6.0, 8.0});
}

TEST_CASE("conv2d matches a quadruple-loop oracle") {
    Rng rng(101);
    const auto x = random_tensor(rng, {2, 5, 5});
    const auto w = random_tensor(rng, {3, 2, 3, 3});
    const auto b = random_tensor(rng, {3});
    const auto y = conv2d_forward(x, w, b);
    REQUIRE(y.dims == std::vector<std::size_t>{3, 3, 3});
    for (std::size_t f = 0; f < 3; ++f)
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                double acc = b.data[f];
                for (std::size_t c = 0; c < 2; ++c)
                    for (std::size_t p = 0; p < 3; ++p)
                        for (std::size_t q = 0; q < 3; ++q)
                            acc += x.data[c * 25 + (i + p) * 5 + (j + q)] *
                                   w.data[((f * 2 + c) * 3 + p) * 3 + q];
                CHECK(std::fabs(y.data[(f * 3 + i) * 3 + j] - acc) <= 1e-10);
            }
}

TEST_CASE("conv2d rejects shape mismatches") {
    Rng rng(5);
    const auto x = random_tensor(rng, {2, 5, 5});
    const auto w = random_tensor(rng, {3, 1, 3, 3});
    const auto b = random_tensor(rng, {3});
    CHECK_THROWS_AS(conv2d_forward(x, w, b), ValidationError);
}

// Central finite differences against a scalar loss sum(y * r) with a fixed
// random weighting r, layer by layer.
namespace {

template <typename Forward>
void check_grads(std::vector<double>& param, const Forward& forward,
                 const std::vector<double>& analytic, const char* what) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double numeric = fd::central(forward, param, i);
        INFO(what << " index " << i);
        CHECK(fd::rel_error(analytic[i], numeric) < 1e-4);
    }
}

} // namespace

TEST_CASE("conv2d backward agrees with finite differences") {
    Rng rng(103);
    auto x = random_tensor(rng, {2, 6, 6});
    auto w = random_tensor(rng, {3, 2, 3, 3});
    auto b = random_tensor(rng, {3});
    const auto y0 = conv2d_forward(x, w, b);
    const auto r = random_tensor(rng, y0.dims);

    const auto loss = [&] {
        const auto y = conv2d_forward(x, w, b);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.numel(); ++i) acc += y.data[i] * r.data[i];
        return acc;
    };
    const auto grads = conv2d_backward(x, w, r);
    check_grads(x.data, loss, grads.input.data, "conv input");
    check_grads(w.data, loss, grads.weights.data, "conv weights");
    check_grads(b.data, loss, grads.bias.data, "conv bias");
}

TEST_CASE("dense backward agrees with finite differences") {
    Rng rng(107);
    auto x = random_tensor(rng, {10});
    auto w = random_tensor(rng, {4, 10});
    auto b = random_tensor(rng, {4});
    const auto r = random_tensor(rng, {4});
    const auto loss = [&] {
        const auto y = dense_forward(x, w, b);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.numel(); ++i) acc += y.data[i] * r.data[i];
        return acc;
    };
    const auto grads = dense_backward(x, w, r);
    check_grads(x.data, loss, grads.input.data, "dense input");
    check_grads(w.data, loss, grads.weights.data, "dense weights");
    check_grads(b.data, loss, grads.bias.data, "dense bias");
}

TEST_CASE("relu backward passes positive inputs through") {
    Rng rng(109);
    auto x = random_tensor(rng, {3, 4, 4}, 0.1, 2.0); // strictly positive
    const auto gy = random_tensor(rng, {3, 4, 4});
    const auto gx = relu_backward(x, gy);
    CHECK(gx.data == gy.data);

    // And zeroes the rest.
    DTensor mixed({4}, {-1.0, 2.0, -3.0, 4.0});
    DTensor up({4}, {1.0, 1.0, 1.0, 1.0});
    const auto g = relu_backward(mixed, up);
    CHECK(g.data == std::vector<double>{0.0, 1.0, 0.0, 1.0});
}

TEST_CASE("maxpool routes gradient to argmax positions only") {
    DTensor x({1, 2, 4}, {1.0, 9.0, 2.0, 3.0,  //
                          4.0, 0.0, 8.0, 5.0});
    const auto pooled = maxpool2_forward(x);
    CHECK(pooled.output.data == std::vector<double>{9.0, 8.0});
    DTensor gy({1, 1, 2}, {0.5, 0.25});
    const auto gx = maxpool2_backward(gy, pooled.argmax, x.dims);
    CHECK(gx.data == std::vector<double>{0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.25, 0.0});
    double up = 0.0, routed = 0.0;
    for (double v : gy.data) up += v;
    for (double v : gx.data) routed += v;
    CHECK(routed == up);
}

TEST_CASE("maxpool backward agrees with finite differences") {
    Rng rng(113);
    auto x = random_tensor(rng, {2, 6, 6});
    const auto pooled = maxpool2_forward(x);
    const auto r = random_tensor(rng, pooled.output.dims);
    const auto loss = [&] {
        const auto y = maxpool2_forward(x).output;
        double acc = 0.0;
        for (std::size_t i = 0; i < y.numel(); ++i) acc += y.data[i] * r.data[i];
        return acc;
    };
    const auto gx = maxpool2_backward(r, pooled.argmax, x.dims);
    check_grads(x.data, loss, gx.data, "pool input");
}

TEST_CASE("softmax and cross entropy fixtures") {
    DTensor z({2}, {0.0, 0.0});
    const auto p = softmax(z);
    CHECK(p.data[0] == doctest::Approx(0.5));
    CHECK(p.data[1] == doctest::Approx(0.5));

    DTensor onehot({3}, {0.0, 1.0, 0.0});
    CHECK(cross_entropy(onehot, 1) == doctest::Approx(0.0));
    CHECK_THROWS_AS(cross_entropy(onehot, 3), ValidationError);

    // Clamp keeps the loss finite.
    DTensor zeroed({2}, {0.0, 1.0});
    CHECK(std::isfinite(cross_entropy(zeroed, 0)));
}

TEST_CASE("softmax outputs a distribution under extreme logits") {
    Rng rng(127);
    for (int trial = 0; trial < 100; ++trial) {
        auto z = random_tensor(rng, {5}, -200.0, 200.0);
        const auto p = softmax(z);
        double total = 0.0;
        for (double v : p.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            total += v;
        }
        CHECK(std::fabs(total - 1.0) <= 1e-9);
    }
}

TEST_CASE("softmax cross-entropy gradient is p minus onehot") {
    Rng rng(131);
    auto z = random_tensor(rng, {6});
    const int label = 2;
    const auto loss = [&] { return cross_entropy(softmax(z), label); };
    const auto analytic = softmax_xent_grad(softmax(z), label);
    check_grads(z.data, loss, analytic.data, "softmax+xent logits");
}

TEST_CASE("adam first step and purity") {
    // Zero gradient leaves parameters untouched.
    std::vector<DTensor> params = {DTensor({1}, {3.0})};
    std::vector<DTensor> zero = {DTensor({1}, {0.0})};
    AdamStateT<double> st;
    adam_init(st, params);
    adam_step(params, zero, st);
    CHECK(params[0].data[0] == 3.0);

    // Hand-evaluated bias-corrected first step: g=1, lr=0.1 -> ~0.1 decrease.
    std::vector<DTensor> theta = {DTensor({1}, {1.0})};
    std::vector<DTensor> grad = {DTensor({1}, {1.0})};
    AdamStateT<double> st2;
    st2.lr = 0.1;
    adam_init(st2, theta);
    adam_step(theta, grad, st2);
    CHECK(theta[0].data[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-6));

    // Identical call with identical state gives identical output.
    std::vector<DTensor> t1 = {DTensor({1}, {0.5})}, t2 = {DTensor({1}, {0.5})};
    AdamStateT<double> s1, s2;
    adam_init(s1, t1);
    adam_init(s2, t2);
    std::vector<DTensor> g = {DTensor({1}, {0.3})};
    adam_step(t1, g, s1);
    adam_step(t2, g, s2);
    CHECK(t1[0].data[0] == t2[0].data[0]);
}

TEST_CASE("adam descends a convex quadratic") {
    std::vector<DTensor> theta = {DTensor({1}, {2.0})};
    AdamStateT<double> st;
    st.lr = 1e-3;
    adam_init(st, theta);
    const auto loss = [&] { return theta[0].data[0] * theta[0].data[0]; };
    const double before = loss();
    std::vector<DTensor> g = {DTensor({1}, {2.0 * theta[0].data[0]})};
    adam_step(theta, g, st);
    CHECK(loss() < before);
}

TEST_CASE("default architecture adapts to the input extent") {
    const auto layers31 = default_architecture({1, 31, 31}, 4);
    CHECK(param_count(layers31) == 22916);
    const auto layers256 = default_architecture({2, 256, 256}, 4);
    CHECK(param_count(layers256) == 3693004);
    // Small inputs drop blocks that no longer fit but keep every layer kind.
    const auto layers8 = default_architecture({1, 8, 8}, 3);
    bool has_conv = false, has_pool = false, has_dense = false, has_flatten = false;
    for (const auto& l : layers8) {
        has_conv |= l.kind == LayerKind::Conv2d;
        has_pool |= l.kind == LayerKind::MaxPool2d;
        has_dense |= l.kind == LayerKind::Dense;
        has_flatten |= l.kind == LayerKind::Flatten;
    }
    CHECK(has_conv);
    CHECK(has_pool);
    CHECK(has_dense);
    CHECK(has_flatten);
    CHECK_NOTHROW(build_model({1, 8, 8}, 3, layers8, 1));
}

TEST_CASE("build_model validates the stack") {
    auto layers = default_architecture({1, 31, 31}, 4);
    CHECK_THROWS_AS(build_model({1, 31, 31}, 5, layers, 1), ValidationError); // wrong classes
    CHECK_THROWS_AS(build_model({1, 8, 8}, 4, layers, 1), ValidationError);   // wrong input
}

TEST_CASE("full default network passes the finite-difference check on 8x8") {
    Rng rng(137);
    const auto specs = default_architecture({1, 8, 8}, 3);
    auto params = init_params<double>(specs, 7);
    auto input = random_tensor(rng, {1, 8, 8});
    const int label = 1;

    const auto loss = [&] {
        const auto logits = forward_layers(specs, params, input);
        return cross_entropy(softmax(logits), label);
    };
    ForwardTrace<double> trace;
    const auto logits = forward_layers(specs, params, input, &trace);
    const auto grad_logits = softmax_xent_grad(softmax(logits), label);
    TensorT<double> grad_input;
    const auto grads = backward_layers(specs, params, trace, grad_logits, &grad_input);

    for (std::size_t k = 0; k < params.size(); ++k)
        check_grads(params[k].data, loss, grads[k].data, "network parameter tensor");
    check_grads(input.data, loss, grad_input.data, "network input");
}

namespace {

// Two linearly separable blob classes rendered as 6x6 single-channel images.
LabeledImages toy_dataset(int per_class, std::uint64_t seed) {
    Rng rng(seed);
    LabeledImages data;
    for (int cls = 0; cls < 2; ++cls) {
        for (int i = 0; i < per_class; ++i) {
            auto img = Tensor::zeros({1, 6, 6});
            for (auto& v : img.data) v = static_cast<float>(rng.uniform(0.0, 0.1));
            // Class 0 lights the top-left quadrant, class 1 the bottom-right.
            const int off = cls == 0 ? 0 : 3;
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    img.data[static_cast<std::size_t>((off + r) * 6 + off + c)] +=
                        static_cast<float>(0.8 + rng.uniform(0.0, 0.2));
            data.images.push_back(std::move(img));
            data.labels.push_back(cls);
        }
    }
    return data;
}

} // namespace

TEST_CASE("training separates a toy two-class problem") {
    auto model = build_default_model({1, 6, 6}, 2, 3);
    const auto data = toy_dataset(16, 21);
    TrainOptions opts;
    opts.epochs = 20;
    opts.batch_size = 8;
    opts.seed = 5;
    const auto result = train(model, data, opts);
    REQUIRE(result.epochs.size() == 20);
    CHECK(result.epochs.back().accuracy == 1.0);
    CHECK(result.wall_seconds >= 0.0);
}

TEST_CASE("zero epochs returns the initial model and an empty log") {
    auto model = build_default_model({1, 6, 6}, 2, 3);
    const auto before = model.params;
    TrainOptions opts;
    opts.epochs = 0;
    const auto result = train(model, toy_dataset(4, 2), opts);
    CHECK(result.epochs.empty());
    for (std::size_t k = 0; k < before.size(); ++k) CHECK(model.params[k].data == before[k].data);
}

TEST_CASE("training is bitwise deterministic under a fixed seed") {
    const auto data = toy_dataset(8, 13);
    TrainOptions opts;
    opts.epochs = 4;
    opts.batch_size = 4;
    opts.seed = 77;
    auto m1 = build_default_model({1, 6, 6}, 2, 9);
    auto m2 = build_default_model({1, 6, 6}, 2, 9);
    const auto r1 = train(m1, data, opts);
    const auto r2 = train(m2, data, opts);
    for (std::size_t k = 0; k < m1.params.size(); ++k)
        CHECK(m1.params[k].data == m2.params[k].data);
    for (std::size_t e = 0; e < r1.epochs.size(); ++e) {
        CHECK(r1.epochs[e].loss == r2.epochs[e].loss);
        CHECK(r1.epochs[e].accuracy == r2.epochs[e].accuracy);
    }
}

TEST_CASE("train rejects mismatched images before the first epoch") {
    auto model = build_default_model({1, 6, 6}, 2, 3);
    LabeledImages bad;
    bad.images.push_back(Tensor::zeros({1, 8, 8}));
    bad.labels.push_back(0);
    TrainOptions opts;
    opts.epochs = 1;
    CHECK_THROWS_AS(train(model, bad, opts), ValidationError);
}

TEST_CASE("predict ties break toward the lowest class") {
    auto model = build_default_model({1, 6, 6}, 3, 3);
    // Zero the final dense layer: uniform probabilities.
    auto& w = model.params[model.params.size() - 2];
    auto& b = model.params[model.params.size() - 1];
    std::fill(w.data.begin(), w.data.end(), 0.0f);
    std::fill(b.data.begin(), b.data.end(), 0.0f);
    const auto p = predict(model, Tensor::zeros({1, 6, 6}));
    CHECK(p.class_index == 0);
    for (double v : p.probabilities) CHECK(v == doctest::Approx(1.0 / 3.0));
    double total = 0.0;
    for (double v : p.probabilities) total += v;
    CHECK(std::fabs(total - 1.0) <= 1e-9);
}

TEST_CASE("predict agrees with the training-time evaluation path") {
    auto model = build_default_model({1, 6, 6}, 2, 3);
    const auto data = toy_dataset(6, 33);
    TrainOptions opts;
    opts.epochs = 3;
    opts.batch_size = 4;
    train(model, data, opts);
    for (std::size_t i = 0; i < data.images.size(); ++i) {
        const auto pred = predict(model, data.images[i]);
        const auto logits = model.forward(data.images[i]);
        int best = 0;
        for (int c = 1; c < 2; ++c)
            if (logits.data[static_cast<std::size_t>(c)] >
                logits.data[static_cast<std::size_t>(best)])
                best = c;
        CHECK(pred.class_index == best);
    }
}

TEST_CASE("model save/load round-trips bit-exactly") {
    testutil::TempDir tmp;
    auto model = build_default_model({1, 6, 6}, 2, 41);
    const auto data = toy_dataset(4, 3);
    TrainOptions opts;
    opts.epochs = 2;
    opts.batch_size = 4;
    train(model, data, opts);

    const auto path = tmp.file("model.vcnn");
    save_model(model, path);
    const auto loaded = load_model(path);
    CHECK(loaded.num_classes == model.num_classes);
    CHECK(loaded.input_shape == model.input_shape);
    REQUIRE(loaded.params.size() == model.params.size());
    for (std::size_t k = 0; k < model.params.size(); ++k)
        CHECK(loaded.params[k].data == model.params[k].data);

    Rng rng(43);
    auto probe = Tensor::zeros({1, 6, 6});
    for (auto& v : probe.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
    const auto a = model.forward(probe);
    const auto b = loaded.forward(probe);
    CHECK(a.data == b.data); // 0 ulp
}

TEST_CASE("load_model rejects corrupt files") {
    testutil::TempDir tmp;
    auto model = build_default_model({1, 6, 6}, 2, 41);
    const auto path = tmp.file("model.vcnn");
    save_model(model, path);

    // Truncate.
    {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream out(tmp.file("trunc.vcnn"), std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_WITH_AS(load_model(tmp.file("trunc.vcnn")), doctest::Contains("corrupt model"),
                         ValidationError);

    // Bad magic.
    {
        std::ofstream out(tmp.file("bad.vcnn"), std::ios::binary);
        out << "NOPE1234";
    }
    CHECK_THROWS_AS(load_model(tmp.file("bad.vcnn")), ValidationError);
    CHECK_THROWS_AS(load_model(tmp.file("missing.vcnn")), IoError);
}

TEST_CASE("predict on a mismatched shape errors instead of crashing") {
    testutil::TempDir tmp;
    auto model = build_default_model({1, 6, 6}, 2, 41);
    const auto path = tmp.file("model.vcnn");
    save_model(model, path);
    const auto loaded = load_model(path);
    CHECK_THROWS_AS(predict(loaded, Tensor::zeros({1, 31, 31})), ValidationError);
}

TEST_CASE("parameter count is derived from the layer stack") {
    const auto model = build_default_model({1, 31, 31}, 4, 1);
    CHECK(model.param_count() == 22916);
    std::size_t total = 0;
    for (const auto& p : model.params) total += p.numel();
    CHECK(total == model.param_count());
}
