#include <doctest.h>

#include <cmath>

#include "gradient_suite.hpp"
#include "har/layers.hpp"
#include "har/network.hpp"
#include "har/ops.hpp"
#include "oracles.hpp"

using namespace har;

TEST_CASE("conv2d: centre-tap identity kernel reproduces the input") {
    Rng rng(1);
    const Tensor x = oracle::random_tensor({2, 7, 9, 1}, rng);
    Tensor w({5, 1, 1});
    w[2] = 1.0;
    const Tensor y = conv2d_forward(x, w, Tensor({1}), Padding::Same);
    CHECK(y == x);
}

TEST_CASE("conv2d: random 12x9x2 input with 3 filters matches the loop oracle") {
    Rng rng(2);
    const Tensor x = oracle::random_tensor({1, 12, 9, 2}, rng);
    const Tensor w = oracle::random_tensor({5, 2, 3}, rng);
    const Tensor b = oracle::random_tensor({3}, rng);
    for (auto pad : {Padding::Same, Padding::Valid}) {
        const Tensor got = conv2d_forward(x, w, b, pad);
        const Tensor want = oracle::naive_conv(x, w, b, pad == Padding::Same);
        REQUIRE(got.shape() == want.shape());
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) < 1e-12);
    }
}

TEST_CASE("conv2d: all-ones kernel on constant input shows zero padding at the edges") {
    const Tensor x({1, 10, 9, 1}, 1.0);
    const Tensor w({5, 1, 1}, 1.0);
    const Tensor y = conv2d_forward(x, w, Tensor({1}), Padding::Same);
    for (std::size_t c = 0; c < 9; ++c) {
        CHECK(y[0 * 9 + c] == 3.0);
        CHECK(y[1 * 9 + c] == 4.0);
        for (std::size_t t = 2; t < 8; ++t) CHECK(y[t * 9 + c] == 5.0);
        CHECK(y[8 * 9 + c] == 4.0);
        CHECK(y[9 * 9 + c] == 3.0);
    }
}

TEST_CASE("conv2d: input map count mismatch is rejected") {
    CHECK_THROWS_AS(conv2d_forward(Tensor({1, 8, 9, 2}), Tensor({5, 3, 4}), Tensor({4}), Padding::Same),
                    std::invalid_argument);
}

TEST_CASE("maxpool: ceiling length, partial window and identity below the window") {
    CHECK(pooled_length(128, 3) == 43);
    CHECK(pooled_length(43, 3) == 15);
    CHECK(pooled_length(15, 3) == 5);
    CHECK(pooled_length(5, 3) == 2);
    CHECK(pooled_length(2, 3) == 2);

    Tensor ramp({1, 128, 1, 1});
    for (std::size_t t = 0; t < 128; ++t) ramp[t] = static_cast<double>(t);
    const auto r = maxpool_forward(ramp, 3);
    REQUIRE(r.output.dim(1) == 43);
    for (std::size_t i = 0; i < 42; ++i) CHECK(r.output[i] == static_cast<double>(3 * i + 2));
    CHECK(r.output[42] == 127.0);  // partial trailing window {126, 127}

    Rng rng(3);
    const Tensor short_in = oracle::random_tensor({2, 2, 9, 4}, rng);
    CHECK(maxpool_forward(short_in, 3).output == short_in);
}

TEST_CASE("maxpool: matches the window-max oracle exactly") {
    Rng rng(4);
    for (int i = 0; i < 10; ++i) {
        const Tensor x = oracle::random_tensor({2, 3 + rng.below(20), 3, 2}, rng);
        CHECK(maxpool_forward(x, 3).output == oracle::naive_maxpool(x, 3));
    }
}

TEST_CASE("relu and dropout basics") {
    const Tensor x({1, 2}, std::vector<double>{-2.0, 3.0});
    const Tensor y = relu_forward(x);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 3.0);

    Rng rng(5);
    const Tensor z = oracle::random_tensor({3, 4, 9, 2}, rng);
    CHECK(dropout_forward(z, 0.0, rng, true).output == z);
    CHECK(dropout_forward(z, 0.5, rng, false).output == z);

    // Inverted scaling: kept units are multiplied by 1 / (1 - p).
    const auto d = dropout_forward(Tensor({1, 1000}, 1.0), 0.5, rng, true);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < 1000; ++i) {
        CHECK((d.output[i] == 0.0 || d.output[i] == 2.0));
        kept += d.output[i] != 0.0;
    }
    CHECK(kept > 400);
    CHECK(kept < 600);
}

TEST_CASE("dropout backward reuses the forward mask") {
    Dropout layer("dropout", 0.5);
    Rng rng(6);
    ForwardContext ctx{true, &rng};
    const Tensor out = layer.forward(Tensor({1, 64}, 1.0), ctx);
    const Tensor grad = layer.backward(Tensor({1, 64}, 1.0));
    for (std::size_t i = 0; i < 64; ++i) CHECK(grad[i] == out[i]);
}

TEST_CASE("batchnorm: training output is standardized per feature map") {
    Rng rng(7);
    BatchNorm bn("bn", 4);
    const Tensor x = oracle::random_tensor({5, 6, 9, 4}, rng, 3.0);
    ForwardContext ctx{true, nullptr};
    const Tensor y = bn.forward(x, ctx);
    const std::size_t positions = y.size() / 4;
    for (std::size_t f = 0; f < 4; ++f) {
        double mean = 0, var = 0;
        for (std::size_t p = 0; p < positions; ++p) mean += y[p * 4 + f];
        mean /= positions;
        for (std::size_t p = 0; p < positions; ++p) var += (y[p * 4 + f] - mean) * (y[p * 4 + f] - mean);
        var /= positions;
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(var - 1.0) < 1e-5);  // epsilon shrinks it slightly
    }
    // Running estimates moved 10% of the way toward the batch statistics.
    CHECK(bn.running_var()[0] != 1.0);
}

TEST_CASE("lstm: zero parameters keep the hidden state at zero") {
    Rng rng(8);
    LSTM lstm("lstm", 6, 4, rng);
    lstm.input_weight().value.fill(0.0);
    lstm.recurrent_weight().value.fill(0.0);
    lstm.bias().value.fill(0.0);
    const Tensor h = lstm.infer(oracle::random_tensor({2, 5, 3, 2}, rng));
    for (double v : h.data()) CHECK(v == 0.0);
}

TEST_CASE("lstm: a single step matches the closed-form cell") {
    Rng rng(9);
    const std::size_t F = 3, H = 2;
    LSTM lstm("lstm", F, H, rng);
    for (auto& v : lstm.bias().value.data()) v = rng.normal();
    const Tensor x = oracle::random_tensor({1, 1, F}, rng);
    const Tensor h = lstm.infer(x);

    const auto& wx = lstm.input_weight().value;
    const auto& b = lstm.bias().value;
    auto pre = [&](std::size_t gate, std::size_t k) {
        double z = b[gate * H + k];
        for (std::size_t f = 0; f < F; ++f) z += x[f] * wx[f * 4 * H + gate * H + k];
        return z;
    };
    auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
    for (std::size_t k = 0; k < H; ++k) {
        // h0 = c0 = 0, so the forget gate and recurrent weights drop out.
        const double c = sig(pre(0, k)) * std::tanh(pre(2, k));
        const double expected = sig(pre(3, k)) * std::tanh(c);
        CHECK(std::abs(h[k] - expected) < 1e-14);
    }
}

TEST_CASE("softmax: uniform, stable and equal to the naive form") {
    const Tensor u = softmax(Tensor({1, 6}, 0.7));
    for (double v : u.data()) CHECK(std::abs(v - 1.0 / 6.0) < 1e-15);

    const Tensor big = softmax(Tensor({1, 2}, std::vector<double>{1000.0, 0.0}));
    CHECK(std::isfinite(big[0]));
    CHECK(big[0] == doctest::Approx(1.0));
    CHECK(big[1] < 1e-300);

    Rng rng(10);
    for (int i = 0; i < 20; ++i) {
        const Tensor z = oracle::random_tensor({1, 6}, rng, 3.0);
        const Tensor a = softmax(z), b = oracle::naive_softmax(z);
        double sum = 0;
        for (std::size_t k = 0; k < 6; ++k) {
            CHECK(std::abs(a[k] - b[k]) < 1e-12);
            CHECK(a[k] > 0.0);
            CHECK(a[k] < 1.0);
            sum += a[k];
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("cross-entropy: zero on exact match, ln 6 on uniform, mean of -ln a_true") {
    const std::vector<std::size_t> cls = {2, 0, 5};
    const Tensor y = one_hot(cls, 6);
    CHECK(cross_entropy(y, y) == 0.0);
    CHECK(cross_entropy(Tensor({3, 6}, 1.0 / 6.0), y) == doctest::Approx(std::log(6.0)).epsilon(1e-12));
    CHECK(std::log(6.0) == doctest::Approx(1.79176).epsilon(1e-5));

    Rng rng(11);
    const Tensor probs = softmax(oracle::random_tensor({8, 6}, rng));
    std::vector<std::size_t> targets(8);
    for (auto& t : targets) t = rng.below(6);
    const double got = cross_entropy(probs, one_hot(targets, 6));
    CHECK(std::abs(got - oracle::naive_cross_entropy(probs, targets)) < 1e-12);
    CHECK(got > 0.0);

    Tensor bad = y;
    bad[0] = 0.5;
    CHECK_THROWS_AS(cross_entropy(y, bad), std::invalid_argument);
}

TEST_CASE("cross-entropy gradient through softmax equals (a - y) / N") {
    Rng rng(12);
    const Tensor probs = softmax(oracle::random_tensor({4, 6}, rng));
    const std::vector<std::size_t> cls = {1, 3, 0, 5};
    const Tensor y = one_hot(cls, 6);
    const Tensor chained = softmax_backward(probs, cross_entropy_grad(probs, y));
    const Tensor fused = softmax_cross_entropy_grad(probs, y);
    for (std::size_t i = 0; i < fused.size(); ++i) CHECK(std::abs(chained[i] - fused[i]) < 1e-15);
}

TEST_CASE("sgd step arithmetic") {
    Tensor p({1}, 1.0);
    sgd_step(p, Tensor({1}, 2.0), 0.01);
    CHECK(p[0] == doctest::Approx(0.98).epsilon(1e-15));

    Rng rng(13);
    Tensor q = oracle::random_tensor({3, 4}, rng);
    const Tensor before = q;
    sgd_step(q, Tensor({3, 4}), 0.01);
    CHECK(q == before);

    // One step on L(w) = (w - 3)^2 from w = 0 lowers the loss.
    Tensor w({1}, 0.0);
    const double l0 = (w[0] - 3) * (w[0] - 3);
    sgd_step(w, Tensor({1}, 2 * (w[0] - 3)), 0.01);
    CHECK((w[0] - 3) * (w[0] - 3) < l0);

    CHECK_THROWS_AS(sgd_step(q, Tensor({4, 3}), 0.01), std::invalid_argument);
}

TEST_CASE("backward without forward is an error; zero upstream gives zero gradients") {
    Rng rng(14);
    Conv2D conv("conv", 2, 3, 5, Padding::Same, rng);
    CHECK_THROWS_AS(conv.backward(Tensor({1, 4, 9, 3})), std::logic_error);

    Network net;
    net.add(std::make_unique<Dense>("dense", 8, 3, rng));
    net.add(std::make_unique<Softmax>("softmax"));
    CHECK_THROWS_AS(net.backward(Tensor({1, 3})), std::logic_error);

    ForwardContext ctx{true, &rng};
    conv.forward(oracle::random_tensor({2, 6, 9, 2}, rng), ctx);
    const Tensor g = conv.backward(Tensor({2, 6, 9, 3}));
    for (double v : g.data()) CHECK(v == 0.0);
    for (auto* p : conv.parameters())
        for (double v : p->grad.data()) CHECK(v == 0.0);
}

TEST_CASE("gradient check: every layer kind against central differences") {
    for (auto kind : oracle::kAllLayerKinds) {
        CAPTURE(layer_kind_name(kind));
        const auto r = oracle::gradient_suite(kind, 5, 2024);
        CHECK(r.entries > 0);
        CHECK(r.max_error < oracle::kGradientTolerance);
    }
}

TEST_CASE("gradient check: a whole network under the loss, dropout included") {
    Rng rng(15);
    Network net;
    net.add(std::make_unique<Conv2D>("conv", 1, 3, 5, Padding::Same, rng));
    net.add(std::make_unique<ReLU>("relu"));
    net.add(std::make_unique<MaxPool>("pool", 3));
    net.add(std::make_unique<BatchNorm>("bn", 3));
    net.add(std::make_unique<Dropout>("dropout", 0.3));
    net.add(std::make_unique<LSTM>("lstm", 2 * 3, 4, rng));
    net.add(std::make_unique<Dense>("dense", 4, 6, rng));
    net.add(std::make_unique<Softmax>("softmax"));

    const Tensor x = oracle::random_tensor({3, 9, 2, 1}, rng);
    const std::vector<std::size_t> cls = {0, 4, 2};
    const Tensor y = one_hot(cls, 6);
    std::vector<Tensor> snapshot;
    for (auto& s : net.state()) snapshot.push_back(*s.tensor);
    auto loss = [&] {
        Rng masks(99);
        ForwardContext ctx{true, &masks};
        const double l = cross_entropy(net.forward(x, ctx), y);
        auto refs = net.state();
        for (std::size_t i = 0; i < refs.size(); ++i) {
            if (refs[i].name.find("running") != std::string::npos) *refs[i].tensor = snapshot[i];
        }
        return l;
    };
    Rng masks(99);
    ForwardContext ctx{true, &masks};
    const Tensor probs = net.forward(x, ctx);
    net.backward(cross_entropy_grad(probs, y));

    double worst = 0.0;
    for (auto* p : net.parameters()) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double orig = p->value[i];
            p->value[i] = orig + 1e-5;
            const double lp = loss();
            p->value[i] = orig - 1e-5;
            const double lm = loss();
            p->value[i] = orig;
            worst = std::max(worst, oracle::relative_error(p->grad[i], (lp - lm) / 2e-5));
        }
    }
    CHECK(worst < 1e-4);
}
