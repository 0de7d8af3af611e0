#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "har/dataset.hpp"
#include "har/model.hpp"

namespace har {

// Column subsets of the two narrowed ensemble members: gyroscope plus total
// acceleration, and the four columns that separate sitting from standing.
inline const ColumnSet kFusionSubsetM1 = {3, 4, 5, 6, 7, 8};
inline const ColumnSet kFusionSubsetM2 = {3, 4, 6, 7};

struct FusionSubsets {
    ColumnSet m1 = kFusionSubsetM1;
    ColumnSet m2 = kFusionSubsetM2;
};

// Three CNN-LSTM models: `main` sees all nine columns, m1 and m2 see their
// subsets. On three-way disagreement `main` decides.
struct FusionEnsemble {
    TrainedModel main;
    TrainedModel m1;
    TrainedModel m2;
    std::uint64_t master_seed = 0;
};

// Seed of ensemble member `index` (0 = main, 1 = m1, 2 = m2).
std::uint64_t fusion_member_seed(std::uint64_t master_seed, std::size_t index);

// train_set: full-width, standardized. config.seed is the master seed; the
// architecture is forced to CNN-LSTM (hidden size defaults to 64).
FusionEnsemble train_fusion(const LabeledDataset& train_set, const NetworkConfig& config,
                            const FusionSubsets& subsets = {});

// Majority of the three labels; result_main when all three differ.
ActivityLabel vote(ActivityLabel result_main, ActivityLabel result_m1, ActivityLabel result_m2);

ActivityLabel predict_fusion(const FusionEnsemble& ensemble, const SignalWindow& window);
std::vector<ActivityLabel> predict_fusion_batch(const FusionEnsemble& ensemble,
                                                std::span<const SignalWindow> windows);

inline constexpr int kEnsembleFormatVersion = 1;

// Writes model_main.harm, model_m1.harm, model_m2.harm and ensemble.json.
void save_ensemble(const FusionEnsemble& ensemble, const std::filesystem::path& dir);
FusionEnsemble load_ensemble(const std::filesystem::path& dir);

}  // namespace har
