#include "cdrec/eval.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <thread>

using nlohmann::json;

namespace cdrec {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

json cacdr_config_json(const CacdrConfig& c) {
    return json{{"encoder_sizes", c.encoder_sizes},
                {"mapper_hidden", c.mapper_hidden},
                {"batch_size", c.batch_size},
                {"init", {{"epochs", c.init.epochs}, {"lr", c.init.lr}, {"l2", c.init.l2}}},
                {"coupled",
                 {{"epochs", c.coupled.epochs}, {"lr", c.coupled.lr}, {"l2", c.coupled.l2}}},
                {"seed", c.seed}};
}

json lfacdr_config_json(const LfacdrConfig& c) {
    json j = json{{"encoder_sizes", c.encoder_sizes},
                  {"mapper_hidden", c.mapper_hidden},
                  {"batch_size", c.batch_size},
                  {"lambda", c.lambda},
                  {"init", {{"epochs", c.init.epochs}, {"lr", c.init.lr}, {"l2", c.init.l2}}},
                  {"coupled",
                   {{"epochs", c.coupled.epochs}, {"lr", c.coupled.lr}, {"l2", c.coupled.l2}}},
                  {"seed", c.seed}};
    return j;
}

}  // namespace

std::pair<double, double> rmse_mae(const Matrix& pred, const Matrix& truth, const Matrix& mask) {
    require(pred.rows() == truth.rows() && pred.cols() == truth.cols() &&
                pred.rows() == mask.rows() && pred.cols() == mask.cols(),
            "rmse_mae: shape mismatch");
    const double count = mask.sum();
    if (count < 1.0) throw std::invalid_argument("rmse_mae: empty mask");
    const Matrix diff = (pred - truth).cwiseProduct(mask);
    const double rmse = std::sqrt(diff.squaredNorm() / count);
    const double mae = diff.cwiseAbs().sum() / count;
    return {rmse, mae};
}

GlobalMeanBaseline baseline_global_mean(const RatingMatrix& train_target) {
    const auto& entries = train_target.entries();
    if (entries.empty())
        throw std::invalid_argument("baseline_global_mean: no observed training ratings");
    double sum = 0.0;
    for (const auto& e : entries) sum += e.value;
    return GlobalMeanBaseline{sum / static_cast<double>(entries.size())};
}

const char* method_name(Method m) {
    switch (m) {
        case Method::Cacdr: return "cacdr";
        case Method::Lfacdr: return "lfacdr";
        case Method::Baseline: return "baseline";
    }
    return "baseline";
}

Method method_from_name(const std::string& name) {
    if (name == "cacdr") return Method::Cacdr;
    if (name == "lfacdr") return Method::Lfacdr;
    if (name == "baseline") return Method::Baseline;
    throw std::invalid_argument("unknown method: " + name);
}

void EvalReport::finalize() {
    const double n = static_cast<double>(repeats.size());
    if (repeats.empty()) return;
    double sr = 0.0, sm = 0.0;
    for (const auto& r : repeats) {
        sr += r.rmse;
        sm += r.mae;
    }
    mean_rmse = sr / n;
    mean_mae = sm / n;
    double vr = 0.0, vm = 0.0;
    for (const auto& r : repeats) {
        vr += (r.rmse - mean_rmse) * (r.rmse - mean_rmse);
        vm += (r.mae - mean_mae) * (r.mae - mean_mae);
    }
    std_rmse = std::sqrt(vr / n);
    std_mae = std::sqrt(vm / n);
}

json EvalReport::to_json() const {
    json reps = json::array();
    for (const auto& r : repeats) {
        reps.push_back(json{{"repeat", r.repeat}, {"rmse", r.rmse}, {"mae", r.mae}});
    }
    return json{{"format_version", 1},
                {"method", method},
                {"config", config_echo},
                {"repeats", std::move(reps)},
                {"aggregates",
                 {{"mean_rmse", mean_rmse},
                  {"std_rmse", std_rmse},
                  {"mean_mae", mean_mae},
                  {"std_mae", std_mae}}}};
}

std::string EvalReport::to_table() const {
    std::ostringstream os;
    os << "method: " << method << "\n";
    os << "repeat      rmse       mae\n";
    char buf[64];
    for (const auto& r : repeats) {
        std::snprintf(buf, sizeof(buf), "%6d  %8.6f  %8.6f\n", r.repeat, r.rmse, r.mae);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "  mean  %8.6f  %8.6f\n", mean_rmse, mean_mae);
    os << buf;
    std::snprintf(buf, sizeof(buf), "   std  %8.6f  %8.6f\n", std_rmse, std_mae);
    os << buf;
    return os.str();
}

RepeatMetrics evaluate_cold_start(Method method, const CacdrModel* cacdr,
                                  const LfacdrModel* lfacdr, const GlobalMeanBaseline* baseline,
                                  const DomainPair& pair, const SplitPlan& plan) {
    const Axis axis = pair.shared_axis;
    const ColdStartSplit split = apply_cold_start(pair, plan);

    Matrix src_rows, src_mask, truth, truth_mask;
    pair.source.materialize_rows(axis, plan.test, src_rows, src_mask);
    split.target_test.materialize_rows(axis, plan.test, truth, truth_mask);

    Matrix pred;
    switch (method) {
        case Method::Cacdr:
            require(cacdr != nullptr, "evaluate_cold_start: missing CACDR model");
            pred = cacdr_predict(*cacdr, src_rows);
            break;
        case Method::Lfacdr:
            require(lfacdr != nullptr, "evaluate_cold_start: missing LFACDR model");
            pred = axis == Axis::Items ? lfacdr_predict_items(*lfacdr, src_rows)
                                       : lfacdr_predict_users(*lfacdr, src_rows);
            break;
        case Method::Baseline:
            require(baseline != nullptr, "evaluate_cold_start: missing baseline");
            pred = Matrix::Constant(truth.rows(), truth.cols(), baseline->mean);
            break;
    }
    const auto [rmse, mae] = rmse_mae(pred, truth, truth_mask);
    RepeatMetrics out;
    out.repeat = plan.repeat;
    out.rmse = rmse;
    out.mae = mae;
    return out;
}

namespace {

struct RepeatResult {
    RepeatMetrics metrics;
    std::optional<CacdrModel> cacdr_model;
    std::optional<LfacdrModel> lfacdr_model;
};

RepeatResult run_one_repeat(Method method, const DomainPair& pair, const ExperimentConfig& cfg,
                            const SplitPlan& plan, bool keep_model, const ProgressFn& progress) {
    const ColdStartSplit split = apply_cold_start(pair, plan);
    const TrainViews views = make_train_views(pair, split, plan);

    // every repeat trains from its own derived model seed
    const std::uint64_t repeat_seed =
        make_rng(cfg.seed, 40000 + static_cast<std::uint64_t>(plan.repeat))();

    RepeatResult out;
    switch (method) {
        case Method::Cacdr: {
            CacdrConfig mc = cfg.cacdr;
            mc.seed = repeat_seed;
            CacdrModel model =
                cfg.run_init
                    ? cacdr_init_stage(views, mc, nullptr, progress)
                    : cacdr_make_model(views.axis, views.source->row_width(views.axis),
                                       views.target_train->row_width(views.axis), mc);
            if (cfg.run_coupled) cacdr_coupled_stage(model, views, mc, nullptr, progress);
            out.metrics = evaluate_cold_start(method, &model, nullptr, nullptr, pair, plan);
            if (keep_model) out.cacdr_model = std::move(model);
            break;
        }
        case Method::Lfacdr: {
            LfacdrConfig mc = cfg.lfacdr;
            mc.seed = repeat_seed;
            LfacdrModel model = cfg.run_init ? lfacdr_init_stage(views, mc, nullptr, progress)
                                             : lfacdr_make_model(views, mc);
            if (cfg.run_coupled) lfacdr_coupled_stage(model, views, mc, nullptr, progress);
            out.metrics = evaluate_cold_start(method, nullptr, &model, nullptr, pair, plan);
            if (keep_model) out.lfacdr_model = std::move(model);
            break;
        }
        case Method::Baseline: {
            const GlobalMeanBaseline bl = baseline_global_mean(split.target_train);
            out.metrics = evaluate_cold_start(method, nullptr, nullptr, &bl, pair, plan);
            break;
        }
    }
    return out;
}

}  // namespace

ExperimentOutput run_experiment(Method method, const DomainPair& pair,
                                const ExperimentConfig& cfg, const ProgressFn& progress) {
    require(cfg.repeats >= 1, "run_experiment: repeats must be >= 1");
    const auto t0 = std::chrono::steady_clock::now();
    const auto plans = make_splits(pair, cfg.split_ratio, cfg.repeats, cfg.seed);

    std::vector<RepeatResult> results(plans.size());
    const int jobs = std::max(1, cfg.jobs);
    if (jobs == 1) {
        for (std::size_t r = 0; r < plans.size(); ++r) {
            results[r] = run_one_repeat(method, pair, cfg, plans[r], r == 0, progress);
        }
    } else {
        // repeats are independent; progress callbacks stay on the caller's thread only
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                const std::size_t r = next.fetch_add(1);
                if (r >= plans.size()) return;
                results[r] = run_one_repeat(method, pair, cfg, plans[r], r == 0, {});
            }
        };
        std::vector<std::thread> pool;
        const int n_threads = std::min<std::size_t>(jobs, plans.size());
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    ExperimentOutput out;
    out.report.method = method_name(method);
    for (auto& r : results) out.report.repeats.push_back(r.metrics);
    out.report.finalize();

    json cfg_echo{{"split_ratio", cfg.split_ratio},
                  {"repeats", cfg.repeats},
                  {"seed", cfg.seed},
                  {"run_init", cfg.run_init},
                  {"run_coupled", cfg.run_coupled}};
    if (method == Method::Cacdr) cfg_echo["cacdr"] = cacdr_config_json(cfg.cacdr);
    if (method == Method::Lfacdr) cfg_echo["lfacdr"] = lfacdr_config_json(cfg.lfacdr);
    out.report.config_echo = std::move(cfg_echo);

    out.cacdr_model = std::move(results[0].cacdr_model);
    out.lfacdr_model = std::move(results[0].lfacdr_model);
    out.checkpoint_plan = plans[0];
    out.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

const char* ablation_grid_name(AblationGrid g) {
    switch (g) {
        case AblationGrid::Coupled: return "coupled";
        case AblationGrid::Init: return "init";
        case AblationGrid::LatentDims: return "latent";
    }
    return "coupled";
}

AblationGrid ablation_grid_from_name(const std::string& name) {
    if (name == "coupled") return AblationGrid::Coupled;
    if (name == "init") return AblationGrid::Init;
    if (name == "latent") return AblationGrid::LatentDims;
    throw std::invalid_argument("unknown ablation grid: " + name);
}

std::string AblationResult::to_table() const {
    // one config row, columns = variant x metric (mean over repeats)
    std::ostringstream header, row;
    header << "config";
    row << "synthetic";
    for (const auto& [name, report] : cells) {
        header << "\t" << name << "/rmse"
               << "\t" << name << "/mae";
        row << "\t" << fmt(report.mean_rmse) << "\t" << fmt(report.mean_mae);
    }
    return "grid: " + grid + "\n" + header.str() + "\n" + row.str() + "\n";
}

json AblationResult::to_json() const {
    json cell_array = json::array();
    for (const auto& [name, report] : cells) {
        cell_array.push_back(json{{"name", name}, {"report", report.to_json()}});
    }
    return json{{"format_version", 1}, {"grid", grid}, {"cells", std::move(cell_array)}};
}

AblationResult run_ablation(AblationGrid grid, Method method, const DomainPair& pair,
                            const ExperimentConfig& cfg, const std::vector<int>& latent_dims,
                            const ProgressFn& progress) {
    require(method != Method::Baseline, "run_ablation: baseline has no stages to ablate");
    AblationResult out;
    out.grid = ablation_grid_name(grid);

    auto run_cell = [&](const std::string& name, const ExperimentConfig& cell_cfg) {
        out.cells.emplace_back(name, run_experiment(method, pair, cell_cfg, progress).report);
    };

    switch (grid) {
        case AblationGrid::Coupled: {
            ExperimentConfig without = cfg;
            without.run_coupled = false;
            run_cell("without_coupled", without);
            ExperimentConfig with = cfg;
            with.run_coupled = true;
            run_cell("with_coupled", with);
            break;
        }
        case AblationGrid::Init: {
            ExperimentConfig without = cfg;
            without.run_init = false;
            run_cell("without_init", without);
            ExperimentConfig with = cfg;
            with.run_init = true;
            run_cell("with_init", with);
            break;
        }
        case AblationGrid::LatentDims: {
            require(!latent_dims.empty(), "run_ablation: empty latent dimension list");
            for (int k : latent_dims) {
                require(k >= 1, "run_ablation: latent dimension must be >= 1");
                ExperimentConfig cell = cfg;
                cell.cacdr.encoder_sizes.back() = k;
                cell.cacdr.mapper_hidden = {2 * k};
                cell.lfacdr.encoder_sizes.back() = k;
                cell.lfacdr.mapper_hidden = {2 * k};
                run_cell("k=" + std::to_string(k), cell);
            }
            break;
        }
    }
    return out;
}

}  // namespace cdrec
