#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "har/dataset.hpp"
#include "har/image.hpp"
#include "har/model.hpp"

namespace har {

// Activations of one convolution block, captured right after its pooling
// stage, for a single window: [time, column, filter].
struct FeatureMap {
    std::size_t layer_index = 0;  // 1-based block number
    Tensor activations;
    std::size_t source_window_id = 0;
    ActivityLabel source_label = ActivityLabel::Walking;

    std::size_t time() const { return activations.dim(0); }
    std::size_t columns() const { return activations.dim(1); }
    std::size_t filters() const { return activations.dim(2); }
};

// Runs the model in inference mode up to block layer_index (1..conv_depth).
// The window must match the model's column subset.
FeatureMap feature_maps(const TrainedModel& model, const SignalWindow& window,
                        std::size_t layer_index, std::size_t window_id = 0,
                        ActivityLabel label = ActivityLabel::Walking);

// Seeded uniform sampling without replacement of n window indices per class.
// Classes absent from the dataset are omitted; a present class with fewer
// than n windows is an error.
std::map<ActivityLabel, std::vector<std::size_t>> sample_windows_per_activity(
    const LabeledDataset& dataset, std::size_t n, std::uint64_t seed);

enum class Aggregation { MeanAbs, MaxAbs, PerFilterGrid };

std::string_view aggregation_name(Aggregation a);
std::optional<Aggregation> aggregation_from_name(std::string_view name);

// Panels tiled by PerFilterGrid: 10 across.
inline constexpr std::size_t kGridColumns = 10;

// Collapses the filter axis (MeanAbs/MaxAbs) into a time x column matrix, or
// tiles every filter's time x column panel (PerFilterGrid). Row-major.
struct AggregatedMap {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
};
AggregatedMap aggregate(const FeatureMap& map, Aggregation aggregation);

// Min-max normalized per image (a constant image maps to 0.5), rows = time,
// columns = sensor columns, each cell upscaled to scale x scale pixels.
GrayImage render_heatmap(const FeatureMap& map, Aggregation aggregation, std::size_t scale = 8);

// e.g. "sitting_w00042_layer3_meanabs"
std::string heatmap_stem(const FeatureMap& map, Aggregation aggregation);

void write_aggregated_csv(const AggregatedMap& map, const std::filesystem::path& path);

}  // namespace har
