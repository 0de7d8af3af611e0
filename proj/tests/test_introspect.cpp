#include <doctest.h>

#include <cmath>
#include <set>

#include "har/image.hpp"
#include "har/introspect.hpp"
#include "test_support.hpp"

using namespace har;
using har::testing::small_config;
using har::testing::synthetic_split;
using har::testing::TempDir;

namespace {

FeatureMap synthetic_map(std::size_t T, std::size_t W, std::size_t F, double fill) {
    FeatureMap m;
    m.layer_index = 1;
    m.activations = Tensor({T, W, F}, fill);
    return m;
}

}  // namespace

TEST_CASE("feature_maps: shape trace, transparency and non-negativity") {
    const auto split = synthetic_split(6, 2, 51);
    NetworkConfig c = small_config(Architecture::Cnn, 3);
    c.epochs = 1;
    const auto m = train(build_network(c), split.train, c);
    const auto& w = split.test.windows[0];
    const auto before = predict(m, w);
    const std::array<std::size_t, 3> times = {43, 15, 5};
    for (std::size_t layer = 1; layer <= 3; ++layer) {
        const auto fm = feature_maps(m, w, layer, 7, split.test.labels[0]);
        CHECK(fm.time() == times[layer - 1]);
        CHECK(fm.columns() == 9);
        CHECK(fm.filters() == c.filters_per_layer);
        CHECK(fm.source_window_id == 7);
        for (double v : fm.activations.data()) CHECK(v >= 0.0);
        CHECK(feature_maps(m, w, layer).activations == fm.activations);
    }
    CHECK(predict(m, w).probabilities == before.probabilities);
    CHECK_THROWS_AS(feature_maps(m, w, 0), std::out_of_range);
    CHECK_THROWS_AS(feature_maps(m, w, 4), std::out_of_range);
}

TEST_CASE("feature_maps: a zero window gives one value per filter") {
    const auto split = synthetic_split(6, 2, 52);
    const auto c = small_config();
    const auto m = train(build_network(c), split.train, c);
    const auto fm = feature_maps(m, SignalWindow(), 1);
    const std::size_t F = fm.filters();
    for (std::size_t t = 0; t < fm.time(); ++t)
        for (std::size_t col = 0; col < fm.columns(); ++col)
            for (std::size_t f = 0; f < F; ++f)
                CHECK(fm.activations[(t * fm.columns() + col) * F + f] == fm.activations[f]);
}

TEST_CASE("feature_maps: narrowed models keep their column count") {
    const auto split = synthetic_split(6, 2, 53);
    NetworkConfig c = small_config();
    c.input_channels = 4;
    const ColumnSet cols = {3, 4, 6, 7};
    const auto m = train(build_network(c), select_columns(split.train, cols), c, cols);
    CHECK(feature_maps(m, select_columns(split.test.windows[0], cols), 2).columns() == 4);
}

TEST_CASE("sample_windows_per_activity") {
    const auto d = synthesize(6, 10, 54);
    const auto six = sample_windows_per_activity(d, 6, 1);
    std::size_t total = 0;
    for (const auto& [label, ids] : six) {
        CHECK(ids.size() == 6);
        CHECK(std::set<std::size_t>(ids.begin(), ids.end()).size() == 6);
        for (auto id : ids) CHECK(d.labels[id] == label);
        total += ids.size();
    }
    CHECK(total == 36);
    CHECK(sample_windows_per_activity(d, 6, 1) == six);
    CHECK(sample_windows_per_activity(d, 6, 2) != six);
    CHECK(sample_windows_per_activity(d, 1, 1).size() == 6);
    CHECK_THROWS_AS(sample_windows_per_activity(d, 11, 1), std::invalid_argument);
}

TEST_CASE("aggregate and render_heatmap") {
    Rng rng(55);
    FeatureMap fm = synthetic_map(5, 9, 50, 0.0);
    for (auto& v : fm.activations.data()) v = rng.normal();
    const auto mean = aggregate(fm, Aggregation::MeanAbs);
    const auto peak = aggregate(fm, Aggregation::MaxAbs);
    for (std::size_t t = 0; t < 5; ++t)
        for (std::size_t c = 0; c < 9; ++c) {
            double s = 0, mx = 0;
            for (std::size_t f = 0; f < 50; ++f) {
                s += std::abs(fm.activations[(t * 9 + c) * 50 + f]);
                mx = std::max(mx, std::abs(fm.activations[(t * 9 + c) * 50 + f]));
            }
            CHECK(std::abs(mean.values[t * 9 + c] - s / 50) < 1e-12);
            CHECK(peak.values[t * 9 + c] == mx);
        }

    const auto img = render_heatmap(fm, Aggregation::MeanAbs, 8);
    CHECK(img.width == 9 * 8);
    CHECK(img.height == 5 * 8);
    const auto grid = render_heatmap(fm, Aggregation::PerFilterGrid, 2);
    CHECK(grid.width == 9 * 10 * 2);
    CHECK(grid.height == 5 * 5 * 2);

    const auto flat = render_heatmap(synthetic_map(5, 9, 4, 3.0), Aggregation::MeanAbs, 3);
    for (double p : flat.pixels) CHECK(p == 0.5);

    FeatureMap stripe = synthetic_map(5, 9, 4, 0.0);
    for (std::size_t t = 0; t < 5; ++t)
        for (std::size_t f = 0; f < 4; ++f) stripe.activations[(t * 9 + 6) * 4 + f] = 2.0;
    const auto s = render_heatmap(stripe, Aggregation::MeanAbs, 1);
    for (std::size_t t = 0; t < 5; ++t)
        for (std::size_t c = 0; c < 9; ++c) CHECK(s.at(t, c) == (c == 6 ? 1.0 : 0.0));
}

TEST_CASE("image files and names") {
    TempDir dir;
    FeatureMap fm = synthetic_map(5, 9, 2, 0.0);
    fm.activations[0] = 1.0;
    fm.source_label = ActivityLabel::Sitting;
    fm.source_window_id = 42;
    fm.layer_index = 3;
    CHECK(heatmap_stem(fm, Aggregation::MeanAbs) == "sitting_w00042_layer3_meanabs");
    CHECK(aggregation_from_name("grid") == Aggregation::PerFilterGrid);
    CHECK_FALSE(aggregation_from_name("sum").has_value());

    const auto img = render_heatmap(fm, Aggregation::MeanAbs, 2);
    write_pgm(img, dir.path() / "a.pgm");
    write_png(img, dir.path() / "a.png");
    const auto pgm = har::testing::read_text(dir.path() / "a.pgm");
    CHECK(pgm.rfind("P5\n18 10\n255\n", 0) == 0);
    CHECK(pgm.size() == std::string("P5\n18 10\n255\n").size() + 180);
    CHECK(static_cast<unsigned char>(pgm[13]) == 255);
    const auto png = har::testing::read_text(dir.path() / "a.png");
    CHECK(png.rfind("\x89PNG\r\n\x1a\n", 0) == 0);

    write_aggregated_csv(aggregate(fm, Aggregation::MeanAbs), dir.path() / "a.csv");
    const auto csv = har::testing::read_text(dir.path() / "a.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') >= 5);
}
