#pragma once

#include "cdrec/data.hpp"
#include "cdrec/numerics.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace cdrec {

/// Hyperparameters of one training stage.
struct StageConfig {
    int epochs = 250;
    double lr = 1e-3;
    double l2 = 1e-5;
};

/// What a training run is allowed to see: the full source matrix, the
/// cold-start-masked target and the shared-axis training entities.
struct TrainViews {
    const RatingMatrix* source = nullptr;
    const RatingMatrix* target_train = nullptr;
    Axis axis = Axis::Items;
    std::vector<int> train_entities;
};

TrainViews make_train_views(const DomainPair& pair, const ColdStartSplit& split,
                            const SplitPlan& plan);

/// Called once per epoch: stage tag, epoch (1-based), total epochs, masked RMSE.
using ProgressFn = std::function<void(const std::string&, int, int, double)>;

/// Per-stage loss curves (masked RMSE per epoch), keyed by stage tag.
using TrainTrace = std::map<std::string, std::vector<double>>;

/// Shuffled fixed-size batches over the given index set.
std::vector<std::vector<int>> make_batches(const std::vector<int>& indices, int batch_size,
                                           std::mt19937_64& rng);

}  // namespace cdrec
