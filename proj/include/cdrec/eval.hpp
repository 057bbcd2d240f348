#pragma once

#include "cdrec/cacdr.hpp"
#include "cdrec/data.hpp"
#include "cdrec/lfacdr.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

// Metrics, the global-mean baseline, the repeated cold-start experiment
// protocol and the three ablations (coupled stage, init stage, latent dims).

namespace cdrec {

/// Pooled RMSE and MAE over the masked cells.
std::pair<double, double> rmse_mae(const Matrix& pred, const Matrix& truth, const Matrix& mask);

/// Predicts the mean observed training rating for every cell.
struct GlobalMeanBaseline {
    double mean = 0.0;
};

GlobalMeanBaseline baseline_global_mean(const RatingMatrix& train_target);

enum class Method { Cacdr, Lfacdr, Baseline };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

struct RepeatMetrics {
    int repeat = 0;
    double rmse = 0.0;
    double mae = 0.0;
};

struct EvalReport {
    std::string method;
    nlohmann::json config_echo;  // fully-resolved configuration
    std::vector<RepeatMetrics> repeats;
    double mean_rmse = 0.0, std_rmse = 0.0;
    double mean_mae = 0.0, std_mae = 0.0;
    double wall_seconds = 0.0;  // informational; never serialized (reports must
                                // be byte-identical across reruns)

    void finalize();  // fills the aggregate fields from repeats
    nlohmann::json to_json() const;
    std::string to_table() const;
};

struct ExperimentConfig {
    double split_ratio = 0.8;
    int repeats = 10;
    std::uint64_t seed = 0;
    bool run_init = true;     // ablation toggle
    bool run_coupled = true;  // ablation toggle
    int jobs = 1;
    CacdrConfig cacdr;
    LfacdrConfig lfacdr;
};

struct ExperimentOutput {
    EvalReport report;
    /// Model of repeat 0, for checkpointing (absent for the baseline).
    std::optional<CacdrModel> cacdr_model;
    std::optional<LfacdrModel> lfacdr_model;
    SplitPlan checkpoint_plan;  // the split the checkpointed model was trained on
};

/// For each repeat: split, cold-start mask, train (stages per the toggles),
/// predict the held-out entities and score them. Repeats are independent and
/// may run in parallel (results are identical to the serial order).
ExperimentOutput run_experiment(Method method, const DomainPair& pair,
                                const ExperimentConfig& cfg, const ProgressFn& progress = {});

/// Scores an already-trained model on one cold-start plan.
RepeatMetrics evaluate_cold_start(Method method, const CacdrModel* cacdr,
                                  const LfacdrModel* lfacdr, const GlobalMeanBaseline* baseline,
                                  const DomainPair& pair, const SplitPlan& plan);

enum class AblationGrid { Coupled, Init, LatentDims };

const char* ablation_grid_name(AblationGrid g);
AblationGrid ablation_grid_from_name(const std::string& name);

struct AblationResult {
    std::string grid;
    std::vector<std::pair<std::string, EvalReport>> cells;

    std::string to_table() const;
    nlohmann::json to_json() const;
};

/// One report per grid cell. Coupled/Init grids toggle the corresponding
/// stage; the latent grid re-runs with each bottleneck width.
AblationResult run_ablation(AblationGrid grid, Method method, const DomainPair& pair,
                            const ExperimentConfig& cfg,
                            const std::vector<int>& latent_dims = {8, 32, 64, 128, 256},
                            const ProgressFn& progress = {});

}  // namespace cdrec
