#include "har/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <system_error>

#include "har/rng.hpp"

namespace har {

namespace fs = std::filesystem;

SignalWindow::SignalWindow(std::size_t columns)
    : cols_(columns), data_(kWindowLength * columns, 0.0) {
    if (columns == 0 || columns > kChannelCount) {
        throw std::invalid_argument("SignalWindow: column count must be in 1..9");
    }
}

SignalWindow::SignalWindow(std::size_t columns, std::vector<double> samples)
    : cols_(columns), data_(std::move(samples)) {
    if (columns == 0 || columns > kChannelCount) {
        throw std::invalid_argument("SignalWindow: column count must be in 1..9");
    }
    if (data_.size() != kWindowLength * columns) {
        throw std::invalid_argument("SignalWindow: expected " +
                                    std::to_string(kWindowLength * columns) + " samples, got " +
                                    std::to_string(data_.size()));
    }
    if (!std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); })) {
        throw std::invalid_argument("SignalWindow: non-finite sample");
    }
}

ColumnSet all_columns() {
    ColumnSet cols(kChannelCount);
    for (std::size_t i = 0; i < kChannelCount; ++i) cols[i] = i;
    return cols;
}

void validate_columns(std::span<const std::size_t> columns) {
    if (columns.empty()) throw std::invalid_argument("column set is empty");
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] >= kChannelCount) {
            throw std::invalid_argument("column index " + std::to_string(columns[i]) +
                                        " outside 0..8");
        }
        if (i > 0 && columns[i] <= columns[i - 1]) {
            throw std::invalid_argument(columns[i] == columns[i - 1]
                                            ? "duplicate column index " + std::to_string(columns[i])
                                            : std::string("column indices must be increasing"));
        }
    }
}

std::string_view split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Test: return "test";
        case Split::Synthetic: return "synthetic";
    }
    return "unknown";
}

std::array<std::size_t, kActivityCount> LabeledDataset::class_counts() const {
    std::array<std::size_t, kActivityCount> counts{};
    for (auto label : labels) ++counts[index_of(label)];
    return counts;
}

void LabeledDataset::validate() const {
    if (windows.empty()) throw std::invalid_argument("dataset is empty");
    if (windows.size() != labels.size()) {
        throw std::invalid_argument("dataset has " + std::to_string(windows.size()) +
                                    " windows but " + std::to_string(labels.size()) + " labels");
    }
    const std::size_t cols = windows.front().cols();
    for (const auto& w : windows) {
        if (w.cols() != cols) throw std::invalid_argument("dataset mixes column counts");
    }
}

namespace {

std::string where(const fs::path& file, std::size_t line) {
    return file.string() + ":" + std::to_string(line) + ": ";
}

std::ifstream open_or_throw(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw DatasetError(file.string() + ": missing or unreadable file");
    return in;
}

// Parses whitespace-separated reals; returns false on a malformed token.
bool parse_reals(std::string_view line, std::vector<double>& out) {
    out.clear();
    const char* p = line.data();
    const char* end = p + line.size();
    for (;;) {
        while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
        if (p == end) return true;
        if (*p == '+') ++p;
        double value = 0.0;
        auto [next, ec] = std::from_chars(p, end, value);
        if (ec != std::errc() || (next < end && *next != ' ' && *next != '\t' && *next != '\r')) {
            return false;
        }
        out.push_back(value);
        p = next;
    }
}

fs::path signal_file(const fs::path& root, Split split, Channel c) {
    const std::string s(split_name(split));
    return root / s / "Inertial Signals" / (std::string(channel_file_stem(c)) + "_" + s + ".txt");
}

fs::path label_file(const fs::path& root, Split split) {
    const std::string s(split_name(split));
    return root / s / ("y_" + s + ".txt");
}

}  // namespace

LabeledDataset load_uci_har(const fs::path& root, Split split) {
    if (split == Split::Synthetic) {
        throw std::invalid_argument("load_uci_har: split must be Train or Test");
    }

    LabeledDataset ds;
    ds.split = split;

    const fs::path labels_path = label_file(root, split);
    {
        auto in = open_or_throw(labels_path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            std::string_view view(line);
            while (!view.empty() && (view.back() == '\r' || view.back() == ' ')) view.remove_suffix(1);
            while (!view.empty() && view.front() == ' ') view.remove_prefix(1);
            if (view.empty()) continue;
            int raw = 0;
            auto [next, ec] = std::from_chars(view.data(), view.data() + view.size(), raw);
            if (ec != std::errc() || next != view.data() + view.size()) {
                throw DatasetError(where(labels_path, line_no) + "malformed label '" +
                                   std::string(view) + "'");
            }
            if (raw < 1 || raw > static_cast<int>(kActivityCount)) {
                throw DatasetError(where(labels_path, line_no) + "label " + std::to_string(raw) +
                                   " outside 1..6");
            }
            ds.labels.push_back(activity_from_raw_label(raw));
        }
    }

    // Verify every signal file exists before parsing any of them.
    for (std::size_t c = 0; c < kChannelCount; ++c) {
        const auto path = signal_file(root, split, channel_from_index(c));
        if (!fs::is_regular_file(path)) {
            throw DatasetError(path.string() + ": missing or unreadable file");
        }
    }

    std::vector<std::vector<double>> samples;  // per window, time-major
    std::vector<double> row;
    for (std::size_t c = 0; c < kChannelCount; ++c) {
        const auto path = signal_file(root, split, channel_from_index(c));
        auto in = open_or_throw(path);
        std::string line;
        std::size_t line_no = 0;
        std::size_t window = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            if (!parse_reals(line, row)) {
                throw DatasetError(where(path, line_no) + "malformed number");
            }
            if (row.size() != kWindowLength) {
                throw DatasetError(where(path, line_no) + "expected 128 values, found " +
                                   std::to_string(row.size()));
            }
            for (double v : row) {
                if (!std::isfinite(v)) throw DatasetError(where(path, line_no) + "non-finite value");
            }
            if (c == 0) samples.emplace_back(kWindowLength * kChannelCount, 0.0);
            if (window >= samples.size()) {
                throw DatasetError(where(path, line_no) + "more rows than " +
                                   signal_file(root, split, Channel::BodyAccX).filename().string());
            }
            auto& dst = samples[window];
            for (std::size_t t = 0; t < kWindowLength; ++t) dst[t * kChannelCount + c] = row[t];
            ++window;
        }
        if (window != samples.size()) {
            throw DatasetError(path.string() + ": " + std::to_string(window) + " rows, expected " +
                               std::to_string(samples.size()));
        }
    }

    if (samples.size() != ds.labels.size()) {
        throw DatasetError(labels_path.string() + ": " + std::to_string(ds.labels.size()) +
                           " labels for " + std::to_string(samples.size()) + " windows");
    }
    if (samples.empty()) throw DatasetError(labels_path.string() + ": no windows");

    ds.windows.reserve(samples.size());
    for (auto& s : samples) ds.windows.emplace_back(kChannelCount, std::move(s));
    return ds;
}

void export_uci_layout(const LabeledDataset& dataset, const fs::path& root, Split split) {
    if (split == Split::Synthetic) {
        throw std::invalid_argument("export_uci_layout: split must be Train or Test");
    }
    dataset.validate();
    if (dataset.columns() != kChannelCount) {
        throw std::invalid_argument("export_uci_layout: windows must carry all 9 channels");
    }
    fs::create_directories(root / split_name(split) / "Inertial Signals");

    char buf[64];
    for (std::size_t c = 0; c < kChannelCount; ++c) {
        const auto path = signal_file(root, split, channel_from_index(c));
        std::ofstream out(path);
        if (!out) throw DatasetError(path.string() + ": cannot write");
        for (const auto& w : dataset.windows) {
            for (std::size_t t = 0; t < kWindowLength; ++t) {
                auto [end, ec] = std::to_chars(buf, buf + sizeof buf, w(t, c));
                out << ' ' << std::string_view(buf, static_cast<std::size_t>(end - buf));
            }
            out << '\n';
        }
    }
    const auto labels_path = label_file(root, split);
    std::ofstream out(labels_path);
    if (!out) throw DatasetError(labels_path.string() + ": cannot write");
    for (auto label : dataset.labels) out << raw_label(label) << '\n';
}

LabeledDataset synthesize(int class_count, int windows_per_class, std::uint64_t seed) {
    if (class_count < 2 || class_count > static_cast<int>(kActivityCount)) {
        throw std::invalid_argument("synthesize: class_count must be in 2..6");
    }
    if (windows_per_class < 1) {
        throw std::invalid_argument("synthesize: windows_per_class must be >= 1");
    }
    const auto classes = static_cast<std::size_t>(class_count);

    LabeledDataset ds;
    ds.split = Split::Synthetic;
    Rng rng(derive_seed(seed, seed_stream::kSynthetic));

    for (std::size_t k = 0; k < classes; ++k) {
        // Class k raises the offset of channels j with j % classes == k and
        // oscillates at k + 1 cycles per window.
        const double cycles = static_cast<double>(k + 1);
        for (int n = 0; n < windows_per_class; ++n) {
            SignalWindow w;
            const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
            for (std::size_t t = 0; t < kWindowLength; ++t) {
                const double angle = 2.0 * std::numbers::pi * cycles * static_cast<double>(t) /
                                         static_cast<double>(kWindowLength) +
                                     phase;
                for (std::size_t j = 0; j < kChannelCount; ++j) {
                    const double offset = (j % classes == k) ? 1.0 : 0.0;
                    const double amplitude = 0.5 + 0.05 * static_cast<double>(j);
                    w(t, j) = offset + amplitude * std::sin(angle) + 0.2 * rng.normal();
                }
            }
            ds.windows.push_back(std::move(w));
            ds.labels.push_back(activity_from_index(k));
        }
    }
    return ds;
}

ChannelStats fit_channel_stats(const LabeledDataset& dataset) {
    dataset.validate();
    const std::size_t cols = dataset.columns();
    ChannelStats stats{std::vector<double>(cols, 0.0), std::vector<double>(cols, 0.0)};
    const double count = static_cast<double>(dataset.size() * kWindowLength);

    for (const auto& w : dataset.windows) {
        for (std::size_t t = 0; t < kWindowLength; ++t) {
            for (std::size_t c = 0; c < cols; ++c) stats.mean[c] += w(t, c);
        }
    }
    for (auto& m : stats.mean) m /= count;

    for (const auto& w : dataset.windows) {
        for (std::size_t t = 0; t < kWindowLength; ++t) {
            for (std::size_t c = 0; c < cols; ++c) {
                const double d = w(t, c) - stats.mean[c];
                stats.stddev[c] += d * d;
            }
        }
    }
    for (auto& s : stats.stddev) {
        s = std::sqrt(s / count);
        if (s < kDegenerateStddev) s = 1.0;
    }
    return stats;
}

SignalWindow apply_channel_stats(const SignalWindow& window, const ChannelStats& stats) {
    const std::size_t cols = window.cols();
    if (stats.mean.size() != cols || stats.stddev.size() != cols) {
        throw std::invalid_argument("channel stats width does not match window");
    }
    SignalWindow out(cols);
    for (std::size_t t = 0; t < kWindowLength; ++t) {
        for (std::size_t c = 0; c < cols; ++c) {
            out(t, c) = (window(t, c) - stats.mean[c]) / stats.stddev[c];
        }
    }
    return out;
}

std::pair<LabeledDataset, ChannelStats> standardize(const LabeledDataset& dataset,
                                                    const std::optional<ChannelStats>& stats) {
    dataset.validate();
    ChannelStats used = stats ? *stats : fit_channel_stats(dataset);
    for (auto& s : used.stddev) {
        if (!(s >= kDegenerateStddev)) s = 1.0;
    }

    LabeledDataset out;
    out.split = dataset.split;
    out.labels = dataset.labels;
    out.windows.reserve(dataset.size());
    for (const auto& w : dataset.windows) out.windows.push_back(apply_channel_stats(w, used));
    out.stats = used;
    return {std::move(out), std::move(used)};
}

SignalWindow select_columns(const SignalWindow& window, std::span<const std::size_t> columns) {
    validate_columns(columns);
    for (auto c : columns) {
        if (c >= window.cols()) {
            throw std::invalid_argument("column index " + std::to_string(c) +
                                        " outside window width " + std::to_string(window.cols()));
        }
    }
    SignalWindow out(columns.size());
    for (std::size_t t = 0; t < kWindowLength; ++t) {
        for (std::size_t j = 0; j < columns.size(); ++j) out(t, j) = window(t, columns[j]);
    }
    return out;
}

LabeledDataset select_columns(const LabeledDataset& dataset, std::span<const std::size_t> columns) {
    validate_columns(columns);
    LabeledDataset out;
    out.split = dataset.split;
    out.labels = dataset.labels;
    // Stats stay those of the full-width parent; models record them to
    // standardize full windows before slicing.
    out.stats = dataset.stats;
    out.windows.reserve(dataset.size());
    for (const auto& w : dataset.windows) out.windows.push_back(select_columns(w, columns));
    return out;
}

}  // namespace har
