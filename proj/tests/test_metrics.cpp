#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "har/metrics.hpp"
#include "har/rng.hpp"
#include "oracles.hpp"

using namespace har;

namespace {

std::vector<ActivityLabel> random_labels(Rng& rng, std::size_t n) {
    std::vector<ActivityLabel> out(n);
    for (auto& l : out) l = activity_from_index(rng.below(kActivityCount));
    return out;
}

}  // namespace

TEST_CASE("confusion_matrix: perfect, single pair and length mismatch") {
    const std::vector<ActivityLabel> truth = {ActivityLabel::Walking, ActivityLabel::Lying,
                                              ActivityLabel::Lying, ActivityLabel::Sitting};
    const auto cm = confusion_matrix(truth, truth);
    CHECK(cm.counts[0][0] == 1);
    CHECK(cm.counts[5][5] == 2);
    CHECK(cm.counts[3][3] == 1);
    CHECK(cm.total() == 4);
    CHECK(accuracy(cm) == 1.0);
    CHECK(macro_f1(cm) == 1.0);

    const std::vector<ActivityLabel> one = {ActivityLabel::Walking};
    const auto single = confusion_matrix(one, one);
    CHECK(single.counts[0][0] == 1);
    CHECK(single.total() == 1);

    CHECK_THROWS_AS(confusion_matrix(truth, one), std::invalid_argument);
    CHECK_THROWS(accuracy(ConfusionMatrix{}));
    CHECK_THROWS(macro_f1(ConfusionMatrix{}));
}

TEST_CASE("confusion_matrix: rows hold the true activity") {
    const std::vector<ActivityLabel> pred = {ActivityLabel::Standing};
    const std::vector<ActivityLabel> truth = {ActivityLabel::Sitting};
    const auto cm = confusion_matrix(pred, truth);
    CHECK(cm.counts[3][4] == 1);
    CHECK(cm.true_count(ActivityLabel::Sitting) == 1);
    CHECK(cm.predicted_count(ActivityLabel::Standing) == 1);
    CHECK(cm.transposed().counts[4][3] == 1);
}

TEST_CASE("published fusion matrix: totals and accuracy") {
    const auto cm = reference_fusion_confusion();
    CHECK(cm.counts[3][4] == 58);  // sitting taken for standing
    CHECK(cm.counts[4][3] == 29);
    const std::array<std::int64_t, 6> rows = {496, 471, 420, 491, 532, 537};
    for (std::size_t i = 0; i < 6; ++i) CHECK(cm.true_count(activity_from_index(i)) == rows[i]);
    std::int64_t trace = 0;
    for (std::size_t i = 0; i < 6; ++i) trace += cm.counts[i][i];
    CHECK(trace == 487 + 468 + 407 + 431 + 503 + 537);
    CHECK(cm.total() == 2947);
    CHECK(accuracy(cm) == doctest::Approx(2833.0 / 2947.0).epsilon(1e-15));
    CHECK(std::abs(accuracy(cm) - 0.961) < 0.001);

    const auto lstm = reference_cnn_lstm_confusion();
    CHECK(lstm.total() == 2947);
    for (std::size_t i = 0; i < 6; ++i) CHECK(lstm.true_count(activity_from_index(i)) == rows[i]);
}

TEST_CASE("macro_f1 matches the brute-force per-class computation") {
    Rng rng(17);
    for (int i = 0; i < 100; ++i) {
        const std::size_t n = 1 + rng.below(60);
        const auto pred = random_labels(rng, n);
        const auto truth = random_labels(rng, n);
        const auto cm = confusion_matrix(pred, truth);
        CHECK(std::abs(macro_f1(cm) - oracle::brute_force_macro_f1(pred, truth)) < 1e-12);
        CHECK(cm.total() == static_cast<std::int64_t>(n));
        const double acc = accuracy(cm);
        CHECK(acc >= 0.0);
        CHECK(acc <= 1.0);
    }
}

TEST_CASE("macro_f1 leaves out classes never seen on either side") {
    const std::vector<ActivityLabel> pred = {ActivityLabel::Walking, ActivityLabel::Upstairs};
    const std::vector<ActivityLabel> truth = {ActivityLabel::Walking, ActivityLabel::Walking};
    // Walking: P = 1, R = 0.5, F1 = 2/3. Upstairs: F1 = 0. The other four are absent.
    CHECK(macro_f1(confusion_matrix(pred, truth)) == doctest::Approx((2.0 / 3.0) / 2.0).epsilon(1e-15));
}

TEST_CASE("accuracy is invariant under a shared permutation of rows and columns") {
    Rng rng(18);
    const auto cm = confusion_matrix(random_labels(rng, 200), random_labels(rng, 200));
    std::array<std::size_t, 6> perm;
    std::iota(perm.begin(), perm.end(), 0);
    for (int k = 0; k < 10; ++k) {
        rng.shuffle(std::span<std::size_t>(perm));
        ConfusionMatrix p;
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = 0; j < 6; ++j) p.counts[perm[i]][perm[j]] = cm.counts[i][j];
        CHECK(accuracy(p) == accuracy(cm));
    }
}

TEST_CASE("compare_report: deltas and flags") {
    const std::vector<NamedResult> results = {{"Fusion", 0.961, 0.96}, {"CNN", 0.90, 0.91},
                                              {"synthetic-run", 0.5, 0.5}};
    const auto report = compare_report(results, 0.015);
    REQUIRE(report.rows.size() == 3);
    CHECK(*report.rows[0].accuracy_delta == 0.0);
    CHECK_FALSE(report.rows[0].flagged);
    CHECK(*report.rows[1].accuracy_delta == doctest::Approx(-0.019).epsilon(1e-12));
    CHECK(report.rows[1].flagged);
    CHECK_FALSE(report.rows[2].reference.has_value());
    CHECK_FALSE(report.rows[2].flagged);
    CHECK(report.text().find("FLAG") != std::string::npos);
    CHECK(report.csv().find("CNN") != std::string::npos);

    CHECK_THROWS_AS(compare_report(std::vector<NamedResult>{}), std::invalid_argument);
    CHECK_THROWS_AS(compare_report(std::vector<NamedResult>{{"", 0.9, 0.9}}), std::invalid_argument);
    CHECK(find_reference("CNN-LSTM")->accuracy == 0.951);
    CHECK_FALSE(find_reference("nope").has_value());
}

TEST_CASE("format_confusion states its orientation") {
    const auto cm = reference_fusion_confusion();
    CHECK(format_confusion(cm, true).find("rows = true activity") != std::string::npos);
    CHECK(format_confusion(cm, false).find("rows = predicted activity") != std::string::npos);
    CHECK(confusion_csv(cm).find("58") != std::string::npos);
}
