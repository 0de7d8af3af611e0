#include <doctest.h>

#include <cmath>

#include "har/metrics.hpp"
#include "har/model.hpp"
#include "har/model_io.hpp"
#include "test_support.hpp"

using namespace har;
using har::testing::small_config;
using har::testing::synthetic_split;
using har::testing::TempDir;

namespace {

// Parameter count of the CNN, worked out from the layer shapes.
std::size_t expected_cnn_parameters(const NetworkConfig& c) {
    std::size_t total = 0, maps = 1, time = c.input_time;
    for (std::size_t d = 0; d < c.conv_depth; ++d) {
        total += c.kernel_time * maps * c.filters_per_layer + c.filters_per_layer;  // conv
        total += 2 * c.filters_per_layer;                                          // bn gamma, beta
        maps = c.filters_per_layer;
        time = time < c.pool_time ? time : (time + c.pool_time - 1) / c.pool_time;
    }
    return total + time * c.input_channels * maps * 6 + 6;
}

std::size_t count_kind(const Network& net, LayerKind kind) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < net.layer_count(); ++i) n += net.layer(i).kind() == kind;
    return n;
}

Tensor random_input(std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Tensor x({1, 128, cols, 1});
    for (auto& v : x.data()) v = rng.normal();
    return x;
}

}  // namespace

TEST_CASE("config defaults are the reference hyperparameters") {
    const NetworkConfig c;
    CHECK(c.input_time == 128);
    CHECK(c.input_channels == 9);
    CHECK(c.conv_depth == 3);
    CHECK(c.filters_per_layer == 50);
    CHECK(c.kernel_time == 5);
    CHECK(c.pool_time == 3);
    CHECK(c.dropout_prob == 0.5);
    CHECK(c.learning_rate == 0.01);
    CHECK(c.epochs == 50);
    CHECK(c.batch_size == 32);
    NetworkConfig bad;
    bad.conv_depth = 6;
    CHECK_THROWS_AS(build_cnn(bad), std::invalid_argument);
    bad.conv_depth = 0;
    CHECK_THROWS_AS(build_cnn(bad), std::invalid_argument);
}

TEST_CASE("build_cnn: parameter count, determinism and depth") {
    NetworkConfig c;
    const Network a = build_cnn(c);
    CHECK(a.parameter_count() == expected_cnn_parameters(c));
    CHECK(a.parameter_count() == 39206);
    CHECK(a.state_dict() == build_cnn(c).state_dict());
    c.seed = 1;
    CHECK(a.state_dict() != build_cnn(c).state_dict());

    c.conv_depth = 1;
    const Network one = build_cnn(c);
    CHECK(count_kind(one, LayerKind::Conv2D) == 1);
    CHECK(one.parameter_count() == expected_cnn_parameters(c));
    CHECK(one.layer(one.layer_count() - 2).kind() == LayerKind::Dense);

    c.conv_depth = 5;
    const Network five = build_cnn(c);
    CHECK(count_kind(five, LayerKind::Conv2D) == 5);
    CHECK(five.output_shape({1, 128, 9, 1}) == Shape{1, 6});
    const Tensor p = five.infer(random_input(9, 3));
    CHECK(p.shape() == Shape{1, 6});
    double sum = 0;
    for (double v : p.data()) sum += v;
    CHECK(std::abs(sum - 1.0) < 1e-9);
}

TEST_CASE("build_cnn: shape trace 128 -> 43 -> 15 -> 5") {
    const Network net = build_cnn(NetworkConfig{});
    Shape s = {1, 128, 9, 1};
    std::vector<std::size_t> after_pool;
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        s = net.layer(i).output_shape(s);
        if (net.layer(i).kind() == LayerKind::MaxPool) after_pool.push_back(s[1]);
        if (net.layer(i).kind() == LayerKind::Conv2D) CHECK(s[2] == 9);
    }
    CHECK(after_pool == std::vector<std::size_t>{43, 15, 5});
}

TEST_CASE("build_cnn_lstm: probabilities, subsets and determinism") {
    NetworkConfig c;
    c.arch = Architecture::CnnLstm;
    CHECK_THROWS_AS(build_cnn_lstm(c), std::invalid_argument);
    c.lstm_hidden = kDefaultLstmHidden;
    const Network net = build_cnn_lstm(c);
    CHECK(count_kind(net, LayerKind::LSTM) == 1);
    CHECK(count_kind(net, LayerKind::Conv2D) == 3);
    const Tensor x = random_input(9, 4);
    const Tensor p = net.infer(x);
    double sum = 0;
    for (double v : p.data()) sum += v;
    CHECK(std::abs(sum - 1.0) < 1e-9);
    CHECK(build_cnn_lstm(c).infer(x) == p);

    c.input_channels = 4;
    const Network narrow = build_network(c);
    CHECK(narrow.infer(random_input(4, 5)).shape() == Shape{1, 6});
    CHECK_THROWS(narrow.infer(random_input(9, 5)));
}

TEST_CASE("argmax_label: first maximum wins") {
    const std::array<double, 6> p = {0.1, 0.5, 0.1, 0.3, 0.0, 0.0};
    CHECK(argmax_label(p) == ActivityLabel::Upstairs);
    std::array<double, 6> tie;
    tie.fill(1.0 / 6.0);
    CHECK(argmax_label(tie) == ActivityLabel::Walking);
}

TEST_CASE("predict: argmax is unchanged by a monotone map of the logits") {
    const Network net = build_cnn(small_config());
    Rng rng(6);
    for (int i = 0; i < 10; ++i) {
        const Tensor x = random_input(9, rng.next_u64());
        const Tensor logits = net.infer_prefix(x, net.layer_count() - 1);
        Tensor mapped = logits;
        for (auto& v : mapped.data()) v = 3.0 * v * v * v + 2.0 * v - 1.0;
        const auto a = softmax(logits), b = softmax(mapped);
        CHECK(argmax_label(a.data()) == argmax_label(b.data()));
    }
}

TEST_CASE("train: small synthetic runs are deterministic and learn") {
    const auto split = synthetic_split(2, 50, 7);
    NetworkConfig c;
    c.conv_depth = 1;
    c.epochs = 5;
    c.seed = 3;
    const auto m = train(build_network(c), split.train, c);
    REQUIRE(m.history.size() == 5);
    const auto pred = predict_labels(m, split.train.windows);
    CHECK(accuracy(confusion_matrix(pred, split.train.labels)) == 1.0);
    CHECK(m.history.back().loss <= m.history.front().loss);
    CHECK(m.network.all_finite());

    const auto again = train(build_network(c), split.train, c);
    CHECK(again.network.state_dict() == m.network.state_dict());
    CHECK(again.history == m.history);
    CHECK(m.input_stats.has_value());
}

TEST_CASE("train: loss after the warm-up never rises above the epoch-5 level") {
    const auto split = synthetic_split(6, 10, 21);
    NetworkConfig c = small_config(Architecture::Cnn, 3);
    c.filters_per_layer = 12;
    c.batch_size = 32;
    c.epochs = 30;
    const auto m = train(build_network(c), split.train, c);
    for (std::size_t e = 5; e < m.history.size(); ++e) CHECK(m.history[e].loss <= m.history[4].loss);
    CHECK(m.history.back().loss < m.history.front().loss);
}

TEST_CASE("train: zero epochs, argument errors and divergence") {
    const auto split = synthetic_split(3, 4, 2);
    NetworkConfig c = small_config();
    c.epochs = 0;
    const Network init = build_network(c);
    const auto m = train(init, split.train, c);
    CHECK(m.history.empty());
    CHECK(m.network.state_dict() == init.state_dict());

    LabeledDataset empty;
    CHECK_THROWS_AS(train(init, empty, c), std::invalid_argument);
    CHECK_THROWS_AS(train(init, select_columns(split.train, ColumnSet{0, 1}), c), std::invalid_argument);

    NetworkConfig wild = small_config();
    wild.learning_rate = 1e200;
    wild.epochs = 3;
    CHECK_THROWS_AS(train(build_network(wild), split.train, wild), TrainingDiverged);
}

TEST_CASE("predict: probabilities sum to one, batch equals single, inference is repeatable") {
    const auto split = synthetic_split(6, 2, 4);
    const auto c = small_config(Architecture::CnnLstm);
    const auto m = train(build_network(c), split.train, c);
    const auto batch = predict_batch(m, split.test.windows);
    for (std::size_t i = 0; i < split.test.size(); ++i) {
        const auto single = predict(m, split.test.windows[i]);
        double sum = 0;
        for (double p : single.probabilities) sum += p;
        CHECK(std::abs(sum - 1.0) < 1e-9);
        CHECK(single.probabilities == batch[i].probabilities);
        CHECK(single.label == argmax_label(single.probabilities));
        CHECK(predict(m, split.test.windows[i]).probabilities == single.probabilities);
    }
    CHECK_THROWS_AS(predict(m, select_columns(split.test.windows[0], ColumnSet{0, 1})), std::invalid_argument);
}

TEST_CASE("subset models slice full windows themselves") {
    const auto split = synthetic_split(3, 4, 5);
    const ColumnSet cols = {3, 4, 6, 7};
    NetworkConfig c = small_config();
    c.input_channels = 4;
    const auto m = train(build_network(c), select_columns(split.train, cols), c, cols);
    CHECK(m.column_subset == cols);
    CHECK(predict_full_labels(m, split.test.windows) ==
          predict_labels(m, select_columns(split.test, cols).windows));
}

TEST_CASE("run_depth_sweep: one row per depth, all above chance on synthetic data") {
    const auto split = synthetic_split(6, 6, 8);
    NetworkConfig c = small_config();
    c.filters_per_layer = 12;
    c.dropout_prob = 0.2;  // five stacked 0.5 dropouts starve a 12-filter net
    c.epochs = 15;
    const std::vector<std::size_t> depths = {1, 2, 3, 4, 5};
    const auto rows = run_depth_sweep(split.train, split.test, depths, c);
    REQUIRE(rows.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(rows[i].depth == depths[i]);
        CHECK(rows[i].accuracy > 1.0 / 6.0);
    }
    const std::vector<std::size_t> three = {3};
    CHECK(run_depth_sweep(split.train, split.test, three, c).size() == 1);
}

TEST_CASE("model files: round trip, subsets and corruption") {
    TempDir dir;
    const auto split = synthetic_split(3, 4, 9);
    const ColumnSet cols = {3, 4, 6, 7};
    NetworkConfig c = small_config(Architecture::CnnLstm);
    c.input_channels = 4;
    const auto m = train(build_network(c), select_columns(split.train, cols), c, cols);
    const auto path = dir.path() / "m.harm";
    save_model(m, path);
    const auto back = load_model(path);
    CHECK(back.config == m.config);
    CHECK(back.column_subset == cols);
    CHECK(back.history == m.history);
    CHECK(back.input_stats->mean == m.input_stats->mean);
    CHECK(back.network.state_dict() == m.network.state_dict());
    CHECK(serialize_model(back) == serialize_model(m));
    for (const auto& w : split.test.windows) {
        const auto sw = select_columns(w, cols);
        CHECK(predict(back, sw).probabilities == predict(m, sw).probabilities);
    }

    const auto bytes = serialize_model(m);
    auto flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x10;
    CHECK_THROWS_WITH_AS(deserialize_model(flipped), doctest::Contains("checksum"), ModelFormatError);

    auto truncated = bytes;
    truncated.resize(bytes.size() / 3);
    CHECK_THROWS_AS(deserialize_model(truncated), ModelFormatError);

    auto versioned = bytes;
    versioned[8] = 2;
    CHECK_THROWS_WITH_AS(deserialize_model(versioned), doctest::Contains("version"), ModelFormatError);

    auto magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_model(magic), ModelFormatError);
    CHECK_THROWS(load_model(dir.path() / "missing.harm"));
}
