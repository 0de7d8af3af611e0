#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "har/dataset.hpp"
#include "har/model.hpp"

namespace har {

// Copy of window with one column set to zero.
SignalWindow occlude_column(const SignalWindow& window, std::size_t column);

using RetentionMatrix = std::array<std::array<double, kChannelCount>, kActivityCount>;

struct OcclusionReport {
    std::array<std::size_t, kActivityCount> sample_counts{};
    // retention[activity][column]: share of that activity's windows still
    // classified as the activity once the column is zeroed.
    RetentionMatrix retention{};
    std::string model_id;

    // Percentages laid out activity-per-column with one row per occluded column.
    std::string csv() const;
    std::string text() const;
};

// The test set must already be standardized with the model's training stats;
// occlusion zeroes the standardized signal. Every activity needs at least one
// window.
OcclusionReport occlusion_report(const TrainedModel& model, const LabeledDataset& test_set,
                                 std::string model_id = {});

struct SignificantColumns {
    std::array<std::vector<std::size_t>, kActivityCount> columns;
    double threshold = 0.0;

    std::string text() const;
};

// Per activity: columns with retention < threshold, lowest retention first
// (ties by column index), at most max_columns of them.
SignificantColumns derive_significant_columns(const OcclusionReport& report, double threshold,
                                              std::size_t max_columns);

inline constexpr double kDefaultSignificanceThreshold = 0.60;
inline constexpr std::size_t kDefaultMaxSignificantColumns = 2;

// Published occlusion retention rates (fractions) and the per-activity
// significant columns obtained from them by hand, in ActivityLabel order.
OcclusionReport reference_occlusion_report();
std::array<std::vector<std::size_t>, kActivityCount> reference_significant_columns();

// Number of activities whose derived column set equals the reference set.
std::size_t count_matching_activities(const SignificantColumns& derived);

}  // namespace har
