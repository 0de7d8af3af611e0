#include "har/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace har {

std::int64_t ConfusionMatrix::total() const {
    std::int64_t t = 0;
    for (const auto& row : counts)
        for (auto v : row) t += v;
    return t;
}

std::int64_t ConfusionMatrix::true_count(ActivityLabel a) const {
    std::int64_t t = 0;
    for (auto v : counts[index_of(a)]) t += v;
    return t;
}

std::int64_t ConfusionMatrix::predicted_count(ActivityLabel a) const {
    std::int64_t t = 0;
    for (const auto& row : counts) t += row[index_of(a)];
    return t;
}

ConfusionMatrix ConfusionMatrix::transposed() const {
    ConfusionMatrix out;
    for (std::size_t i = 0; i < kActivityCount; ++i)
        for (std::size_t j = 0; j < kActivityCount; ++j) out.counts[j][i] = counts[i][j];
    return out;
}

ConfusionMatrix confusion_matrix(std::span<const ActivityLabel> predictions,
                                 std::span<const ActivityLabel> truths) {
    if (predictions.size() != truths.size()) {
        throw std::invalid_argument("confusion_matrix: " + std::to_string(predictions.size()) +
                                    " predictions vs " + std::to_string(truths.size()) + " truths");
    }
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        ++cm.counts[index_of(truths[i])][index_of(predictions[i])];
    }
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    const auto total = cm.total();
    if (total <= 0) throw std::invalid_argument("accuracy: empty confusion matrix");
    std::int64_t trace = 0;
    for (std::size_t i = 0; i < kActivityCount; ++i) trace += cm.counts[i][i];
    return static_cast<double>(trace) / static_cast<double>(total);
}

std::array<ClassScores, kActivityCount> per_class_scores(const ConfusionMatrix& cm) {
    std::array<ClassScores, kActivityCount> out{};
    for (std::size_t k = 0; k < kActivityCount; ++k) {
        const auto a = activity_from_index(k);
        const double tp = static_cast<double>(cm.counts[k][k]);
        const double predicted = static_cast<double>(cm.predicted_count(a));
        const double actual = static_cast<double>(cm.true_count(a));
        auto& s = out[k];
        s.precision = predicted > 0 ? tp / predicted : 0.0;
        s.recall = actual > 0 ? tp / actual : 0.0;
        const double pr = s.precision + s.recall;
        s.f1 = pr > 0 ? 2.0 * s.precision * s.recall / pr : 0.0;
    }
    return out;
}

double macro_f1(const ConfusionMatrix& cm) {
    if (cm.total() <= 0) throw std::invalid_argument("macro_f1: empty confusion matrix");
    const auto scores = per_class_scores(cm);
    double sum = 0.0;
    std::size_t classes = 0;
    for (std::size_t k = 0; k < kActivityCount; ++k) {
        const auto a = activity_from_index(k);
        if (cm.true_count(a) == 0 && cm.predicted_count(a) == 0) continue;
        sum += scores[k].f1;
        ++classes;
    }
    return sum / static_cast<double>(classes);
}

std::optional<ReferenceResult> find_reference(std::string_view name) {
    for (const auto& r : kReferenceResults) {
        if (r.name == name) return r;
    }
    return std::nullopt;
}

ConfusionMatrix reference_fusion_confusion() {
    return ConfusionMatrix{{{
        {487, 6, 3, 0, 0, 0},
        {1, 468, 2, 0, 0, 0},
        {0, 13, 407, 0, 0, 0},
        {0, 2, 0, 431, 58, 0},
        {0, 0, 0, 29, 503, 0},
        {0, 0, 0, 0, 0, 537},
    }}};
}

ConfusionMatrix reference_cnn_lstm_confusion() {
    return ConfusionMatrix{{{
        {493, 3, 0, 0, 0, 0},
        {3, 466, 2, 0, 0, 0},
        {3, 18, 398, 0, 1, 0},
        {0, 1, 0, 421, 69, 0},
        {0, 0, 0, 42, 490, 0},
        {0, 0, 0, 0, 1, 536},
    }}};
}

namespace {

std::string fixed(double v, int digits = 3) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string signed_fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.3f", v);
    return buf;
}

std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.insert(0, width - s.size(), ' ');
    return s;
}

}  // namespace

ComparisonReport compare_report(std::span<const NamedResult> results, double tolerance) {
    if (results.empty()) throw std::invalid_argument("compare_report: no results");
    ComparisonReport report;
    report.tolerance = tolerance;
    for (const auto& r : results) {
        if (r.name.empty()) throw std::invalid_argument("compare_report: result with empty name");
        ComparisonRow row;
        row.result = r;
        row.reference = find_reference(r.name);
        if (row.reference) {
            row.accuracy_delta = r.accuracy - row.reference->accuracy;
            if (row.reference->f1) row.f1_delta = r.f1 - *row.reference->f1;
            // Compare at the printed precision so 0.90 vs 0.919 (-0.019)
            // flags at 0.015 and an exact match never does.
            const double acc_delta = std::round(*row.accuracy_delta * 1e6) / 1e6;
            row.flagged = std::abs(acc_delta) > tolerance;
            if (row.f1_delta) {
                const double f1_delta = std::round(*row.f1_delta * 1e6) / 1e6;
                row.flagged = row.flagged || std::abs(f1_delta) > tolerance;
            }
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::string ComparisonReport::text() const {
    std::ostringstream out;
    out << "model                accuracy  ref_acc  delta      f1        ref_f1   delta\n";
    for (const auto& row : rows) {
        std::string name = row.result.name;
        if (name.size() < 20) name.append(20 - name.size(), ' ');
        out << name << ' ' << pad(fixed(row.result.accuracy, 4), 8) << "  "
            << pad(row.reference ? fixed(row.reference->accuracy) : "-", 7) << "  "
            << pad(row.accuracy_delta ? signed_fixed(*row.accuracy_delta) : "-", 7) << "    "
            << pad(fixed(row.result.f1, 4), 6) << "  "
            << pad(row.reference && row.reference->f1 ? fixed(*row.reference->f1, 2) : "-", 7)
            << "  " << pad(row.f1_delta ? signed_fixed(*row.f1_delta) : "-", 7)
            << (row.flagged ? "  FLAG" : "") << '\n';
    }
    out << "tolerance " << fixed(tolerance) << '\n';
    return out.str();
}

std::string ComparisonReport::csv() const {
    std::ostringstream out;
    out << "model,accuracy,f1,reference_accuracy,accuracy_delta,reference_f1,f1_delta,flagged\n";
    for (const auto& row : rows) {
        out << row.result.name << ',' << fixed(row.result.accuracy, 6) << ','
            << fixed(row.result.f1, 6) << ','
            << (row.reference ? fixed(row.reference->accuracy) : "") << ','
            << (row.accuracy_delta ? fixed(*row.accuracy_delta, 6) : "") << ','
            << (row.reference && row.reference->f1 ? fixed(*row.reference->f1, 2) : "") << ','
            << (row.f1_delta ? fixed(*row.f1_delta, 6) : "") << ','
            << (row.flagged ? "1" : "0") << '\n';
    }
    return out.str();
}

std::string format_confusion(const ConfusionMatrix& cm, bool row_is_truth) {
    const ConfusionMatrix& shown = row_is_truth ? cm : cm.transposed();
    std::ostringstream out;
    out << (row_is_truth ? "rows = true activity, columns = predicted activity\n"
                         : "rows = predicted activity, columns = true activity\n");
    out << pad("", 11);
    for (auto a : kAllActivities) out << pad(std::string(activity_name(a)), 11);
    out << '\n';
    for (std::size_t i = 0; i < kActivityCount; ++i) {
        out << pad(std::string(activity_name(activity_from_index(i))), 11);
        for (std::size_t j = 0; j < kActivityCount; ++j) {
            out << pad(std::to_string(shown.counts[i][j]), 11);
        }
        out << '\n';
    }
    return out.str();
}

std::string confusion_csv(const ConfusionMatrix& cm) {
    std::ostringstream out;
    out << "true\\predicted";
    for (auto a : kAllActivities) out << ',' << activity_name(a);
    out << '\n';
    for (std::size_t i = 0; i < kActivityCount; ++i) {
        out << activity_name(activity_from_index(i));
        for (std::size_t j = 0; j < kActivityCount; ++j) out << ',' << cm.counts[i][j];
        out << '\n';
    }
    return out.str();
}

}  // namespace har
