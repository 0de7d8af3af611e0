#include "har/occlusion.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace har {

SignalWindow occlude_column(const SignalWindow& window, std::size_t column) {
    if (column >= window.cols()) {
        throw std::out_of_range("occlude_column: column " + std::to_string(column) +
                                " outside window width " + std::to_string(window.cols()));
    }
    SignalWindow out = window;
    for (std::size_t t = 0; t < kWindowLength; ++t) out(t, column) = 0.0;
    return out;
}

OcclusionReport occlusion_report(const TrainedModel& model, const LabeledDataset& test_set,
                                 std::string model_id) {
    test_set.validate();
    if (test_set.columns() != kChannelCount || model.column_subset.size() != kChannelCount) {
        throw std::invalid_argument("occlusion_report: needs a nine-column model and test set");
    }
    OcclusionReport report;
    report.model_id = std::move(model_id);
    report.sample_counts = test_set.class_counts();
    for (auto a : kAllActivities) {
        if (report.sample_counts[index_of(a)] == 0) {
            throw std::invalid_argument("occlusion_report: no test windows for " +
                                        std::string(activity_name(a)));
        }
    }

    std::vector<SignalWindow> occluded;
    occluded.reserve(test_set.size());
    for (std::size_t c = 0; c < kChannelCount; ++c) {
        occluded.clear();
        for (const auto& w : test_set.windows) occluded.push_back(occlude_column(w, c));
        const auto predicted = predict_labels(model, occluded);
        std::array<std::size_t, kActivityCount> retained{};
        for (std::size_t i = 0; i < predicted.size(); ++i) {
            if (predicted[i] == test_set.labels[i]) ++retained[index_of(test_set.labels[i])];
        }
        for (std::size_t a = 0; a < kActivityCount; ++a) {
            report.retention[a][c] = static_cast<double>(retained[a]) /
                                     static_cast<double>(report.sample_counts[a]);
        }
    }
    return report;
}

std::string OcclusionReport::csv() const {
    std::ostringstream out;
    out << "occluded_column";
    for (auto a : kAllActivities) out << ',' << activity_name(a);
    out << "\nsample_number";
    for (auto n : sample_counts) out << ',' << n;
    out << '\n';
    char buf[32];
    for (std::size_t c = 0; c < kChannelCount; ++c) {
        out << c;
        for (std::size_t a = 0; a < kActivityCount; ++a) {
            std::snprintf(buf, sizeof buf, "%.2f", 100.0 * retention[a][c]);
            out << ',' << buf;
        }
        out << '\n';
    }
    return out.str();
}

std::string OcclusionReport::text() const {
    std::ostringstream out;
    if (!model_id.empty()) out << "model " << model_id << '\n';
    char buf[32];
    out << "column";
    for (auto a : kAllActivities) {
        std::snprintf(buf, sizeof buf, "%11s", std::string(activity_name(a)).c_str());
        out << buf;
    }
    out << "\nn     ";
    for (std::size_t a = 0; a < kActivityCount; ++a) {
        std::snprintf(buf, sizeof buf, "%11zu", sample_counts[a]);
        out << buf;
    }
    out << '\n';
    for (std::size_t c = 0; c < kChannelCount; ++c) {
        std::snprintf(buf, sizeof buf, "%-6zu", c);
        out << buf;
        for (std::size_t a = 0; a < kActivityCount; ++a) {
            std::snprintf(buf, sizeof buf, "%10.0f%%", 100.0 * retention[a][c]);
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

SignificantColumns derive_significant_columns(const OcclusionReport& report, double threshold,
                                              std::size_t max_columns) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw std::invalid_argument("derive_significant_columns: threshold must be in (0, 1]");
    }
    if (max_columns < 1 || max_columns > kChannelCount) {
        throw std::invalid_argument("derive_significant_columns: max_columns must be in 1..9");
    }
    SignificantColumns out;
    out.threshold = threshold;
    for (std::size_t a = 0; a < kActivityCount; ++a) {
        const auto& row = report.retention[a];
        std::vector<std::size_t> cols;
        for (std::size_t c = 0; c < kChannelCount; ++c) {
            if (row[c] < threshold) cols.push_back(c);
        }
        std::stable_sort(cols.begin(), cols.end(),
                         [&](std::size_t x, std::size_t y) { return row[x] < row[y]; });
        if (cols.size() > max_columns) cols.resize(max_columns);
        out.columns[a] = std::move(cols);
    }
    return out;
}

std::string SignificantColumns::text() const {
    std::ostringstream out;
    out << "threshold " << threshold << '\n';
    for (std::size_t a = 0; a < kActivityCount; ++a) {
        out << activity_name(activity_from_index(a)) << ':';
        if (columns[a].empty()) out << " -";
        for (auto c : columns[a]) out << ' ' << c;
        out << '\n';
    }
    return out.str();
}

OcclusionReport reference_occlusion_report() {
    OcclusionReport r;
    r.model_id = "published";
    r.sample_counts = {477, 435, 364, 411, 475, 535};
    // Rows: occluded column 0..8; columns: activity.
    constexpr int percent[kChannelCount][kActivityCount] = {
        {99, 28, 4, 99, 99, 100},   {98, 98, 100, 96, 100, 100}, {99, 96, 100, 95, 100, 100},
        {19, 84, 76, 100, 39, 99},  {54, 96, 89, 83, 100, 100},  {60, 97, 94, 97, 99, 100},
        {94, 97, 95, 9, 52, 100},   {96, 46, 100, 90, 86, 89},   {99, 96, 96, 96, 98, 92},
    };
    for (std::size_t c = 0; c < kChannelCount; ++c)
        for (std::size_t a = 0; a < kActivityCount; ++a) r.retention[a][c] = percent[c][a] / 100.0;
    return r;
}

std::array<std::vector<std::size_t>, kActivityCount> reference_significant_columns() {
    return {{{3, 4}, {0, 7}, {0, 6}, {6}, {3, 6}, {7, 8}}};
}

std::size_t count_matching_activities(const SignificantColumns& derived) {
    const auto reference = reference_significant_columns();
    std::size_t matches = 0;
    for (std::size_t a = 0; a < kActivityCount; ++a) {
        auto got = derived.columns[a];
        std::sort(got.begin(), got.end());
        if (got == reference[a]) ++matches;
    }
    return matches;
}

}  // namespace har
