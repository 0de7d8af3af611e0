#include "har/introspect.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "har/rng.hpp"

namespace har {

FeatureMap feature_maps(const TrainedModel& model, const SignalWindow& window,
                        std::size_t layer_index, std::size_t window_id, ActivityLabel label) {
    if (layer_index < 1 || layer_index > model.config.conv_depth) {
        throw std::out_of_range("feature_maps: layer " + std::to_string(layer_index) +
                                " outside 1.." + std::to_string(model.config.conv_depth));
    }
    if (window.cols() != model.column_subset.size()) {
        throw std::invalid_argument("feature_maps: window width does not match the model");
    }
    std::size_t pools_seen = 0;
    std::size_t end = 0;
    for (std::size_t i = 0; i < model.network.layer_count(); ++i) {
        if (model.network.layer(i).kind() == LayerKind::MaxPool && ++pools_seen == layer_index) {
            end = i + 1;
            break;
        }
    }
    if (end == 0) throw std::logic_error("feature_maps: network lacks the requested block");

    const Tensor out =
        model.network.infer_prefix(windows_to_tensor(std::span<const SignalWindow>(&window, 1)), end);
    FeatureMap map;
    map.layer_index = layer_index;
    map.activations = out.reshaped({out.dim(1), out.dim(2), out.dim(3)});
    map.source_window_id = window_id;
    map.source_label = label;
    return map;
}

std::map<ActivityLabel, std::vector<std::size_t>> sample_windows_per_activity(
    const LabeledDataset& dataset, std::size_t n, std::uint64_t seed) {
    dataset.validate();
    std::map<ActivityLabel, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < dataset.size(); ++i) by_class[dataset.labels[i]].push_back(i);

    std::map<ActivityLabel, std::vector<std::size_t>> out;
    Rng rng(derive_seed(seed, seed_stream::kSampling));
    for (auto a : kAllActivities) {
        auto it = by_class.find(a);
        const std::size_t available = it == by_class.end() ? 0 : it->second.size();
        if (available == 0) continue;
        if (available < n) {
            throw std::invalid_argument("sample_windows_per_activity: " +
                                        std::string(activity_name(a)) + " has only " +
                                        std::to_string(available) + " windows, need " +
                                        std::to_string(n));
        }
        auto pool = it->second;
        // Partial Fisher-Yates: the first n slots become the sample.
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = i + rng.below(pool.size() - i);
            std::swap(pool[i], pool[j]);
        }
        pool.resize(n);
        out.emplace(a, std::move(pool));
    }
    return out;
}

std::string_view aggregation_name(Aggregation a) {
    switch (a) {
        case Aggregation::MeanAbs: return "meanabs";
        case Aggregation::MaxAbs: return "maxabs";
        case Aggregation::PerFilterGrid: return "grid";
    }
    return "unknown";
}

std::optional<Aggregation> aggregation_from_name(std::string_view name) {
    for (auto a : {Aggregation::MeanAbs, Aggregation::MaxAbs, Aggregation::PerFilterGrid}) {
        if (aggregation_name(a) == name) return a;
    }
    return std::nullopt;
}

AggregatedMap aggregate(const FeatureMap& map, Aggregation aggregation) {
    const std::size_t T = map.time(), W = map.columns(), F = map.filters();
    const auto& act = map.activations;
    AggregatedMap out;
    if (aggregation == Aggregation::PerFilterGrid) {
        const std::size_t grid_cols = std::min(kGridColumns, F);
        const std::size_t grid_rows = (F + grid_cols - 1) / grid_cols;
        out.rows = T * grid_rows;
        out.cols = W * grid_cols;
        out.values.assign(out.rows * out.cols, 0.0);
        for (std::size_t f = 0; f < F; ++f) {
            const std::size_t r0 = (f / grid_cols) * T, c0 = (f % grid_cols) * W;
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t c = 0; c < W; ++c)
                    out.values[(r0 + t) * out.cols + c0 + c] = act[(t * W + c) * F + f];
        }
        return out;
    }
    out.rows = T;
    out.cols = W;
    out.values.assign(T * W, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t c = 0; c < W; ++c) {
            const double* v = act.raw() + (t * W + c) * F;
            double acc = 0.0;
            for (std::size_t f = 0; f < F; ++f) {
                acc = aggregation == Aggregation::MeanAbs ? acc + std::abs(v[f])
                                                          : std::max(acc, std::abs(v[f]));
            }
            out.values[t * W + c] = aggregation == Aggregation::MeanAbs ? acc / static_cast<double>(F) : acc;
        }
    }
    return out;
}

GrayImage render_heatmap(const FeatureMap& map, Aggregation aggregation, std::size_t scale) {
    if (map.activations.empty()) throw std::invalid_argument("render_heatmap: empty feature map");
    if (scale == 0) throw std::invalid_argument("render_heatmap: scale must be positive");
    const AggregatedMap agg = aggregate(map, aggregation);
    const auto [lo_it, hi_it] = std::minmax_element(agg.values.begin(), agg.values.end());
    const double lo = *lo_it, hi = *hi_it;

    GrayImage img;
    img.width = agg.cols * scale;
    img.height = agg.rows * scale;
    img.pixels.resize(img.width * img.height);
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
            const double v = agg.values[(y / scale) * agg.cols + x / scale];
            img.pixels[y * img.width + x] = hi > lo ? (v - lo) / (hi - lo) : 0.5;
        }
    }
    return img;
}

std::string heatmap_stem(const FeatureMap& map, Aggregation aggregation) {
    std::string activity(activity_name(map.source_label));
    std::transform(activity.begin(), activity.end(), activity.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s_w%05zu_layer%zu_%s", activity.c_str(), map.source_window_id,
                  map.layer_index, std::string(aggregation_name(aggregation)).c_str());
    return buf;
}

void write_aggregated_csv(const AggregatedMap& map, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
    char buf[32];
    for (std::size_t r = 0; r < map.rows; ++r) {
        for (std::size_t c = 0; c < map.cols; ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", map.values[r * map.cols + c]);
            out << (c ? "," : "") << buf;
        }
        out << '\n';
    }
}

}  // namespace har
