#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "har/activity.hpp"
#include "har/dataset.hpp"
#include "har/network.hpp"

namespace har {

enum class Architecture : std::uint8_t { Cnn = 0, CnnLstm = 1 };

std::string_view architecture_name(Architecture a);
std::optional<Architecture> architecture_from_name(std::string_view name);

inline constexpr std::size_t kDefaultLstmHidden = 64;

// Defaults are the reference CNN hyperparameters: 128x9 input, 50 kernels of
// 5x1, 3x1 pooling, dropout 0.5, learning rate 0.01, 50 epochs of batches of
// 32.
struct NetworkConfig {
    Architecture arch = Architecture::Cnn;
    std::size_t input_time = kWindowLength;
    std::size_t input_channels = kChannelCount;
    std::size_t conv_depth = 3;
    std::size_t filters_per_layer = 50;
    std::size_t kernel_time = 5;
    std::size_t pool_time = 3;
    double dropout_prob = 0.5;
    double learning_rate = 0.01;
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    std::optional<std::size_t> lstm_hidden;
    std::uint64_t seed = 0;

    // Throws std::invalid_argument naming the offending field.
    void validate() const;
    bool operator==(const NetworkConfig&) const = default;
};

// conv_depth x [Conv2D -> ReLU -> MaxPool -> BatchNorm -> Dropout] -> Dense(6) -> Softmax.
Network build_cnn(const NetworkConfig& config);
// conv_depth x conv block -> LSTM(lstm_hidden) -> Dense(6) -> Softmax.
Network build_cnn_lstm(const NetworkConfig& config);
Network build_network(const NetworkConfig& config);

struct EpochStats {
    double loss = 0.0;      // mean minibatch loss in training mode
    double accuracy = 0.0;  // training-mode accuracy over the epoch
    bool operator==(const EpochStats&) const = default;
};

struct TrainedModel {
    NetworkConfig config;
    Network network;
    ColumnSet column_subset;
    std::vector<EpochStats> history;
    // Full-width standardization the model was trained under, if any.
    std::optional<ChannelStats> input_stats;
};

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Mini-batch SGD on the categorical cross-entropy. Epoch e visits the
// training set in an order shuffled by derive_seed(derive_seed(seed,
// kShuffle), e); dropout masks come from one stream seeded by
// derive_seed(seed, kDropout). column_subset defaults to all nine channels and
// must match both config.input_channels and the dataset width.
TrainedModel train(Network network, const LabeledDataset& train_set, const NetworkConfig& config,
                   std::optional<ColumnSet> column_subset = std::nullopt);

struct Prediction {
    ActivityLabel label = ActivityLabel::Walking;
    std::array<double, kActivityCount> probabilities{};
};

// First maximal entry wins ties.
ActivityLabel argmax_label(std::span<const double> probabilities);

Tensor windows_to_tensor(std::span<const SignalWindow> windows);

// The window must already be reduced to the model's column subset.
Prediction predict(const TrainedModel& model, const SignalWindow& window);
std::vector<Prediction> predict_batch(const TrainedModel& model,
                                      std::span<const SignalWindow> windows);
std::vector<ActivityLabel> predict_labels(const TrainedModel& model,
                                          std::span<const SignalWindow> windows);

// Slices full nine-column windows to the model's subset, then predicts.
std::vector<ActivityLabel> predict_full_labels(const TrainedModel& model,
                                               std::span<const SignalWindow> full_windows);

struct DepthResult {
    std::size_t depth = 0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
};

// Trains one CNN per depth with the same seed and evaluates on test_set.
std::vector<DepthResult> run_depth_sweep(const LabeledDataset& train_set,
                                         const LabeledDataset& test_set,
                                         std::span<const std::size_t> depths,
                                         const NetworkConfig& config);

}  // namespace har
