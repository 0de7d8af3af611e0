#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "har/activity.hpp"

namespace har {

inline constexpr std::size_t kWindowLength = 128;

// One pre-windowed sensor segment: kWindowLength rows (time) by 1..9 columns
// (channels). Full windows carry all nine channels in Channel order; column
// subsets produced by select_columns keep the same row layout.
class SignalWindow {
public:
    explicit SignalWindow(std::size_t columns = kChannelCount);
    SignalWindow(std::size_t columns, std::vector<double> samples);

    std::size_t rows() const { return kWindowLength; }
    std::size_t cols() const { return cols_; }

    double operator()(std::size_t t, std::size_t c) const { return data_[t * cols_ + c]; }
    double& operator()(std::size_t t, std::size_t c) { return data_[t * cols_ + c]; }

    std::span<const double> samples() const { return data_; }
    std::span<double> samples() { return data_; }

    bool operator==(const SignalWindow&) const = default;

private:
    std::size_t cols_;
    std::vector<double> data_;
};

// Ordered, strictly increasing set of channel indices in 0..8.
using ColumnSet = std::vector<std::size_t>;

ColumnSet all_columns();

// Throws std::invalid_argument on an empty set, an index > 8, or a
// non-increasing sequence (duplicates included).
void validate_columns(std::span<const std::size_t> columns);

struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

// Standard deviations below this are replaced by 1.
inline constexpr double kDegenerateStddev = 1e-8;

enum class Split { Train, Test, Synthetic };

std::string_view split_name(Split s);

struct LabeledDataset {
    std::vector<SignalWindow> windows;
    std::vector<ActivityLabel> labels;
    Split split = Split::Synthetic;
    std::optional<ChannelStats> stats;

    std::size_t size() const { return windows.size(); }
    std::size_t columns() const { return windows.empty() ? 0 : windows.front().cols(); }
    std::array<std::size_t, kActivityCount> class_counts() const;

    // Non-empty, equal lengths, consistent column count.
    void validate() const;
};

// Parse/consistency failure while reading dataset files; the message carries
// "file:line:" when a specific line is at fault.
class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Reads <root>/<train|test>/Inertial Signals/*.txt and y_<split>.txt.
LabeledDataset load_uci_har(const std::filesystem::path& root, Split split);

// Writes a dataset in the same layout load_uci_har reads. Values are printed
// in shortest round-trip form, so reloading is bit-exact.
void export_uci_layout(const LabeledDataset& dataset, const std::filesystem::path& root,
                       Split split);

// Deterministic desk-scale corpus: each class has its own per-channel offset
// pattern and sinusoid frequency; the seed drives per-window phase and
// Gaussian noise only, so datasets drawn with different seeds share class
// structure.
LabeledDataset synthesize(int class_count, int windows_per_class, std::uint64_t seed);

// Per-channel z-score. Without stats, fits mean and population stddev over
// every sample of every window; with stats, applies them unchanged.
std::pair<LabeledDataset, ChannelStats> standardize(const LabeledDataset& dataset,
                                                    const std::optional<ChannelStats>& stats = {});

ChannelStats fit_channel_stats(const LabeledDataset& dataset);
SignalWindow apply_channel_stats(const SignalWindow& window, const ChannelStats& stats);

SignalWindow select_columns(const SignalWindow& window, std::span<const std::size_t> columns);
LabeledDataset select_columns(const LabeledDataset& dataset, std::span<const std::size_t> columns);

}  // namespace har
