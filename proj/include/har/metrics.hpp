#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "har/activity.hpp"

namespace har {

// counts[true][predicted], activities in ActivityLabel order.
struct ConfusionMatrix {
    std::array<std::array<std::int64_t, kActivityCount>, kActivityCount> counts{};

    std::int64_t total() const;
    std::int64_t true_count(ActivityLabel a) const;       // row sum
    std::int64_t predicted_count(ActivityLabel a) const;  // column sum
    ConfusionMatrix transposed() const;
    bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion_matrix(std::span<const ActivityLabel> predictions,
                                 std::span<const ActivityLabel> truths);

// trace / total; throws on an empty matrix.
double accuracy(const ConfusionMatrix& cm);

// Unweighted mean of per-class F1 = 2PR/(P+R). A class contributes F1 = 0
// when P + R = 0; a class that is neither true nor predicted anywhere is left
// out of the mean.
double macro_f1(const ConfusionMatrix& cm);

struct ClassScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};
std::array<ClassScores, kActivityCount> per_class_scores(const ConfusionMatrix& cm);

// Published numbers the reports compare against. Never used as expected
// values for code under test.
struct ReferenceResult {
    std::string_view name;
    double accuracy;
    std::optional<double> f1;
};

inline constexpr std::array<ReferenceResult, 7> kReferenceResults = {{
    {"CNN", 0.919, 0.92},
    {"LSTM", 0.892, 0.89},
    {"Baseline-34", 0.89, std::nullopt},
    {"Baseline-35", 0.893, std::nullopt},
    {"Baseline-36", 0.962, std::nullopt},
    {"CNN-LSTM", 0.951, 0.95},
    {"Fusion", 0.961, 0.96},
}};

std::optional<ReferenceResult> find_reference(std::string_view name);

// Published confusion matrices (true activity per row).
ConfusionMatrix reference_fusion_confusion();
ConfusionMatrix reference_cnn_lstm_confusion();

struct NamedResult {
    std::string name;
    double accuracy = 0.0;
    double f1 = 0.0;
};

struct ComparisonRow {
    NamedResult result;
    std::optional<ReferenceResult> reference;
    std::optional<double> accuracy_delta;
    std::optional<double> f1_delta;
    bool flagged = false;
};

struct ComparisonReport {
    std::vector<ComparisonRow> rows;
    double tolerance = 0.0;

    std::string text() const;
    std::string csv() const;
};

// Matches each result to a reference by name; deltas beyond tolerance are
// flagged. Throws std::invalid_argument on an empty list or an empty name.
ComparisonReport compare_report(std::span<const NamedResult> results, double tolerance = 0.015);

// Aligned table with activity headers. row_is_truth selects the orientation
// printed; the header states which axis holds the true activity.
std::string format_confusion(const ConfusionMatrix& cm, bool row_is_truth = true);
std::string confusion_csv(const ConfusionMatrix& cm);

}  // namespace har
