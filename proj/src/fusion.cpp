#include "har/fusion.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "har/model_io.hpp"
#include "har/rng.hpp"

namespace har {

std::uint64_t fusion_member_seed(std::uint64_t master_seed, std::size_t index) {
    return derive_seed(derive_seed(master_seed, seed_stream::kEnsemble), index);
}

namespace {

TrainedModel train_member(const LabeledDataset& full, NetworkConfig config, const ColumnSet& subset,
                          std::size_t index, std::uint64_t master_seed) {
    config.input_channels = subset.size();
    config.seed = fusion_member_seed(master_seed, index);
    const LabeledDataset data = subset.size() == kChannelCount ? full : select_columns(full, subset);
    return train(build_cnn_lstm(config), data, config, subset);
}

}  // namespace

FusionEnsemble train_fusion(const LabeledDataset& train_set, const NetworkConfig& config,
                            const FusionSubsets& subsets) {
    train_set.validate();
    if (train_set.columns() != kChannelCount) {
        throw std::invalid_argument("train_fusion: training set must carry all nine columns");
    }
    validate_columns(subsets.m1);
    validate_columns(subsets.m2);

    NetworkConfig base = config;
    base.arch = Architecture::CnnLstm;
    if (!base.lstm_hidden) base.lstm_hidden = kDefaultLstmHidden;

    FusionEnsemble e;
    e.master_seed = config.seed;
    e.main = train_member(train_set, base, all_columns(), 0, config.seed);
    e.m1 = train_member(train_set, base, subsets.m1, 1, config.seed);
    e.m2 = train_member(train_set, base, subsets.m2, 2, config.seed);
    return e;
}

ActivityLabel vote(ActivityLabel result_main, ActivityLabel result_m1, ActivityLabel result_m2) {
    if (result_m1 == result_m2) return result_m1;
    return result_main;
}

std::vector<ActivityLabel> predict_fusion_batch(const FusionEnsemble& ensemble,
                                                std::span<const SignalWindow> windows) {
    for (const auto& w : windows) {
        if (w.cols() != kChannelCount) {
            throw std::invalid_argument("predict_fusion: window must carry all nine columns");
        }
    }
    const auto main = predict_full_labels(ensemble.main, windows);
    const auto m1 = predict_full_labels(ensemble.m1, windows);
    const auto m2 = predict_full_labels(ensemble.m2, windows);
    std::vector<ActivityLabel> out(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) out[i] = vote(main[i], m1[i], m2[i]);
    return out;
}

ActivityLabel predict_fusion(const FusionEnsemble& ensemble, const SignalWindow& window) {
    return predict_fusion_batch(ensemble, std::span<const SignalWindow>(&window, 1)).front();
}

namespace {

constexpr const char* kManifestName = "ensemble.json";
constexpr std::array<const char*, 3> kRoles = {"main", "m1", "m2"};

}  // namespace

void save_ensemble(const FusionEnsemble& ensemble, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json manifest;
    manifest["format_version"] = kEnsembleFormatVersion;
    manifest["master_seed"] = ensemble.master_seed;
    const std::array<const TrainedModel*, 3> members = {&ensemble.main, &ensemble.m1, &ensemble.m2};
    for (std::size_t i = 0; i < members.size(); ++i) {
        const std::string file = std::string("model_") + kRoles[i] + ".harm";
        save_model(*members[i], dir / file);
        manifest["models"].push_back(
            {{"role", kRoles[i]}, {"file", file}, {"columns", members[i]->column_subset}});
    }
    std::ofstream out(dir / kManifestName);
    if (!out) throw std::runtime_error((dir / kManifestName).string() + ": cannot write");
    out << manifest.dump(2) << '\n';
}

FusionEnsemble load_ensemble(const std::filesystem::path& dir) {
    std::ifstream in(dir / kManifestName);
    if (!in) throw std::runtime_error((dir / kManifestName).string() + ": missing ensemble manifest");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error((dir / kManifestName).string() + ": " + e.what());
    }
    if (manifest.value("format_version", -1) != kEnsembleFormatVersion) {
        throw std::runtime_error("unsupported ensemble format version");
    }
    const auto& models = manifest.at("models");
    if (!models.is_array() || models.size() != 3) {
        throw std::runtime_error("ensemble manifest must list three models");
    }
    FusionEnsemble e;
    e.master_seed = manifest.at("master_seed").get<std::uint64_t>();
    const std::array<TrainedModel*, 3> members = {&e.main, &e.m1, &e.m2};
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& entry = models[i];
        if (entry.at("role").get<std::string>() != kRoles[i]) {
            throw std::runtime_error("ensemble manifest lists models out of order");
        }
        *members[i] = load_model(dir / entry.at("file").get<std::string>());
        if (entry.at("columns").get<ColumnSet>() != members[i]->column_subset) {
            throw std::runtime_error(std::string("ensemble member ") + kRoles[i] +
                                     ": manifest columns disagree with the model file");
        }
    }
    if (e.main.column_subset != all_columns()) {
        throw std::runtime_error("ensemble main model must use all nine columns");
    }
    return e;
}

}  // namespace har
