#include "har/model.hpp"

#include <algorithm>
#include <numeric>

#include "har/metrics.hpp"

namespace har {

std::string_view architecture_name(Architecture a) {
    return a == Architecture::Cnn ? "cnn" : "cnn-lstm";
}

std::optional<Architecture> architecture_from_name(std::string_view name) {
    if (name == "cnn") return Architecture::Cnn;
    if (name == "cnn-lstm") return Architecture::CnnLstm;
    return std::nullopt;
}

void NetworkConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("NetworkConfig: " + what); };
    if (input_time == 0) fail("input_time must be positive");
    if (input_channels == 0 || input_channels > kChannelCount) fail("input_channels must be in 1..9");
    if (conv_depth < 1 || conv_depth > 5) fail("conv_depth must be in 1..5");
    if (filters_per_layer == 0) fail("filters_per_layer must be positive");
    if (kernel_time == 0 || kernel_time % 2 == 0) fail("kernel_time must be odd");
    if (pool_time == 0) fail("pool_time must be positive");
    if (!(dropout_prob >= 0.0 && dropout_prob < 1.0)) fail("dropout_prob must be in [0, 1)");
    if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
    if (batch_size == 0) fail("batch_size must be positive");
    if (lstm_hidden && *lstm_hidden == 0) fail("lstm_hidden must be positive");
    if (arch == Architecture::CnnLstm && !lstm_hidden) fail("cnn-lstm requires lstm_hidden");
}

namespace {

// Appends the convolution blocks; returns the output time length.
std::size_t add_conv_blocks(Network& net, const NetworkConfig& config, Rng& init) {
    std::size_t time = config.input_time;
    std::size_t in_maps = 1;
    for (std::size_t d = 1; d <= config.conv_depth; ++d) {
        const std::string block = "block" + std::to_string(d);
        net.add(std::make_unique<Conv2D>(block + ".conv", in_maps, config.filters_per_layer,
                                         config.kernel_time, Padding::Same, init));
        net.add(std::make_unique<ReLU>(block + ".relu"));
        net.add(std::make_unique<MaxPool>(block + ".pool", config.pool_time));
        net.add(std::make_unique<BatchNorm>(block + ".bn", config.filters_per_layer));
        net.add(std::make_unique<Dropout>(block + ".dropout", config.dropout_prob));
        time = pooled_length(time, config.pool_time);
        in_maps = config.filters_per_layer;
    }
    return time;
}

}  // namespace

Network build_cnn(const NetworkConfig& config) {
    config.validate();
    Rng init(derive_seed(config.seed, seed_stream::kInit));
    Network net;
    const std::size_t time = add_conv_blocks(net, config, init);
    const std::size_t features = time * config.input_channels * config.filters_per_layer;
    net.add(std::make_unique<Dense>("dense", features, kActivityCount, init));
    net.add(std::make_unique<Softmax>("softmax"));
    return net;
}

Network build_cnn_lstm(const NetworkConfig& config) {
    config.validate();
    if (!config.lstm_hidden) throw std::invalid_argument("build_cnn_lstm: lstm_hidden not set");
    Rng init(derive_seed(config.seed, seed_stream::kInit));
    Network net;
    add_conv_blocks(net, config, init);
    const std::size_t step_features = config.input_channels * config.filters_per_layer;
    net.add(std::make_unique<LSTM>("lstm", step_features, *config.lstm_hidden, init));
    net.add(std::make_unique<Dense>("dense", *config.lstm_hidden, kActivityCount, init));
    net.add(std::make_unique<Softmax>("softmax"));
    return net;
}

Network build_network(const NetworkConfig& config) {
    return config.arch == Architecture::Cnn ? build_cnn(config) : build_cnn_lstm(config);
}

Tensor windows_to_tensor(std::span<const SignalWindow> windows) {
    if (windows.empty()) throw std::invalid_argument("windows_to_tensor: no windows");
    const std::size_t cols = windows.front().cols();
    const std::size_t per = kWindowLength * cols;
    std::vector<double> data;
    data.reserve(windows.size() * per);
    for (const auto& w : windows) {
        if (w.cols() != cols) throw std::invalid_argument("windows_to_tensor: mixed widths");
        data.insert(data.end(), w.samples().begin(), w.samples().end());
    }
    return Tensor({windows.size(), kWindowLength, cols, 1}, std::move(data));
}

ActivityLabel argmax_label(std::span<const double> probabilities) {
    if (probabilities.size() != kActivityCount) {
        throw std::invalid_argument("argmax_label: expected 6 probabilities");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < probabilities.size(); ++i) {
        if (probabilities[i] > probabilities[best]) best = i;
    }
    return activity_from_index(best);
}

TrainedModel train(Network network, const LabeledDataset& train_set, const NetworkConfig& config,
                   std::optional<ColumnSet> column_subset) {
    config.validate();
    train_set.validate();
    if (train_set.columns() != config.input_channels) {
        throw std::invalid_argument("train: dataset has " + std::to_string(train_set.columns()) +
                                    " channels, config expects " +
                                    std::to_string(config.input_channels));
    }
    ColumnSet subset;
    if (column_subset) {
        subset = *column_subset;
    } else if (config.input_channels == kChannelCount) {
        subset = all_columns();
    } else {
        throw std::invalid_argument("train: column subset required for a narrowed input");
    }
    validate_columns(subset);
    if (subset.size() != config.input_channels) {
        throw std::invalid_argument("train: column subset size does not match input_channels");
    }
    if (train_set.windows.front().rows() != config.input_time) {
        throw std::invalid_argument("train: window length does not match input_time");
    }

    TrainedModel model{config, std::move(network), subset, {}, train_set.stats};
    const std::size_t n = train_set.size();
    Rng dropout_rng(derive_seed(config.seed, seed_stream::kDropout));
    const std::uint64_t shuffle_base = derive_seed(config.seed, seed_stream::kShuffle);
    OptimizerState optimizer{config.learning_rate, 0};
    auto params = model.network.parameters();

    std::vector<std::size_t> order(n);
    std::vector<SignalWindow> batch_windows;
    std::vector<std::size_t> batch_classes;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle(derive_seed(shuffle_base, epoch));
        shuffle.shuffle(std::span<std::size_t>(order));

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t end = std::min(n, start + config.batch_size);
            batch_windows.clear();
            batch_classes.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch_windows.push_back(train_set.windows[order[i]]);
                batch_classes.push_back(index_of(train_set.labels[order[i]]));
            }
            const Tensor input = windows_to_tensor(batch_windows);
            const Tensor targets = one_hot(batch_classes, kActivityCount);

            ForwardContext ctx{true, &dropout_rng};
            const Tensor probs = model.network.forward(input, ctx);
            loss_sum += cross_entropy(probs, targets) * static_cast<double>(end - start);
            for (std::size_t b = 0; b < end - start; ++b) {
                auto row = probs.data().subspan(b * kActivityCount, kActivityCount);
                if (index_of(argmax_label(row)) == batch_classes[b]) ++correct;
            }
            model.network.backward_from_logits(softmax_cross_entropy_grad(probs, targets));
            sgd_step(params, optimizer);
        }
        if (!model.network.all_finite()) {
            throw TrainingDiverged("training diverged: non-finite parameter after epoch " +
                                   std::to_string(epoch + 1));
        }
        model.history.push_back({loss_sum / static_cast<double>(n),
                                 static_cast<double>(correct) / static_cast<double>(n)});
    }
    return model;
}

std::vector<Prediction> predict_batch(const TrainedModel& model,
                                      std::span<const SignalWindow> windows) {
    constexpr std::size_t kChunk = 128;
    std::vector<Prediction> out;
    out.reserve(windows.size());
    for (std::size_t start = 0; start < windows.size(); start += kChunk) {
        const auto chunk = windows.subspan(start, std::min(kChunk, windows.size() - start));
        for (const auto& w : chunk) {
            if (w.cols() != model.column_subset.size()) {
                throw std::invalid_argument("predict: window has " + std::to_string(w.cols()) +
                                            " columns, model expects " +
                                            std::to_string(model.column_subset.size()));
            }
        }
        const Tensor probs = model.network.infer(windows_to_tensor(chunk));
        if (probs.rank() != 2 || probs.dim(1) != kActivityCount) {
            throw std::logic_error("predict: network does not produce 6 probabilities");
        }
        for (std::size_t b = 0; b < chunk.size(); ++b) {
            Prediction p;
            std::copy_n(probs.raw() + b * kActivityCount, kActivityCount, p.probabilities.begin());
            p.label = argmax_label(p.probabilities);
            out.push_back(p);
        }
    }
    return out;
}

Prediction predict(const TrainedModel& model, const SignalWindow& window) {
    return predict_batch(model, std::span<const SignalWindow>(&window, 1)).front();
}

std::vector<ActivityLabel> predict_labels(const TrainedModel& model,
                                          std::span<const SignalWindow> windows) {
    std::vector<ActivityLabel> labels;
    labels.reserve(windows.size());
    for (const auto& p : predict_batch(model, windows)) labels.push_back(p.label);
    return labels;
}

std::vector<ActivityLabel> predict_full_labels(const TrainedModel& model,
                                               std::span<const SignalWindow> full_windows) {
    if (model.column_subset.size() == kChannelCount) return predict_labels(model, full_windows);
    std::vector<SignalWindow> sliced;
    sliced.reserve(full_windows.size());
    for (const auto& w : full_windows) sliced.push_back(select_columns(w, model.column_subset));
    return predict_labels(model, sliced);
}

std::vector<DepthResult> run_depth_sweep(const LabeledDataset& train_set,
                                         const LabeledDataset& test_set,
                                         std::span<const std::size_t> depths,
                                         const NetworkConfig& config) {
    if (depths.empty()) throw std::invalid_argument("run_depth_sweep: no depths");
    test_set.validate();
    std::vector<DepthResult> results;
    for (std::size_t depth : depths) {
        NetworkConfig c = config;
        c.arch = Architecture::Cnn;
        c.conv_depth = depth;
        c.validate();
        const TrainedModel model = train(build_cnn(c), train_set, c);
        const auto predicted = predict_full_labels(model, test_set.windows);
        const auto cm = confusion_matrix(predicted, test_set.labels);
        results.push_back({depth, accuracy(cm), macro_f1(cm)});
    }
    return results;
}

}  // namespace har
