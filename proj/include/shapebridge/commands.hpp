#pragma once

// The five run commands behind the command-line tool. Each command validates
// its inputs (exit 2 on usage problems), maps data failures to exit 3 and
// numerical failures to exit 4, and on success writes its outputs plus a
// resolved-config snapshot sufficient to replay the run.

#include <Eigen/Dense>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "shapebridge/bridge.hpp"
#include "shapebridge/errors.hpp"
#include "shapebridge/geometry.hpp"
#include "shapebridge/io.hpp"
#include "shapebridge/score_net.hpp"
#include "shapebridge/sde.hpp"
#include "shapebridge/trainer.hpp"

namespace shapebridge {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

namespace detail {

inline int run_guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const NumericalBlowupError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const IllConditionedError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const HorizonError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const Error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    }
}

inline bool missing_file(const std::string& path, const char* what) {
    if (path.empty()) {
        std::cerr << "usage error: no " << what << " given\n";
        return true;
    }
    if (!std::filesystem::exists(path)) {
        std::cerr << "usage error: " << what << " not found: " << path << "\n";
        return true;
    }
    return false;
}

inline void ensure_out_dir(const std::string& out_dir) {
    if (out_dir.empty()) throw MalformedInputError("output directory is empty");
    std::filesystem::create_directories(out_dir);
}

inline std::string indexed_name(const char* prefix, std::size_t index,
                                const std::string& source, const char* suffix) {
    char counter[8];
    std::snprintf(counter, sizeof(counter), "%03zu", index);
    const std::string stem = std::filesystem::path(source).stem().string();
    return std::string(prefix) + counter + (stem.empty() ? "" : "_" + stem) + suffix;
}

inline void apply_overrides(RunConfig& config, const std::optional<std::uint64_t>& seed,
                            const std::optional<int>& threads) {
    if (seed) config.seed = *seed;
    if (threads) config.threads = *threads;
    config.validate();
}

inline Eigen::VectorXd mean_state_at(const std::vector<Trajectory>& paths, int index) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(paths.front().states.front().size());
    for (const auto& path : paths) mean += path.states[static_cast<std::size_t>(index)];
    return mean / static_cast<double>(paths.size());
}

inline const char* score_kind_name(ScoreKind kind) {
    switch (kind) {
        case ScoreKind::ClosedFormExact: return "closed_form_exact";
        case ScoreKind::ClosedFormInexact: return "closed_form_inexact";
        case ScoreKind::Learned: return "learned";
        case ScoreKind::MonteCarlo: return "monte_carlo";
    }
    return "unknown";
}

// Transition-score oracle of the plain Brownian system anchored at x0.
inline ScoreProvider bm_transition_oracle(const Eigen::VectorXd& x0, double sigma) {
    const double variance = sigma * sigma;
    return ScoreProvider{ScoreKind::ClosedFormExact,
                         [x0, variance](double t, const Eigen::VectorXd& x) {
                             if (!(t > 0.0)) {
                                 throw HorizonError("transition score needs t > 0");
                             }
                             return Eigen::VectorXd(-(x - x0) / (variance * t));
                         }};
}

}  // namespace detail

struct AlignOptions {
    std::vector<std::string> inputs;
    int points = 200;
    std::string out_dir;
};

// Resamples every input curve, aligns the set by similarity Procrustes, and
// writes the aligned curves plus the consensus mean. All inputs are parsed
// before anything is written, so one bad file leaves the output directory
// untouched.
inline int cmd_align(const AlignOptions& options) {
    if (options.inputs.size() < 2) {
        std::cerr << "usage error: align needs at least 2 input curves, got "
                  << options.inputs.size() << "\n";
        return kExitUsage;
    }
    if (options.points < 3) {
        std::cerr << "usage error: --points must be at least 3\n";
        return kExitUsage;
    }
    if (options.out_dir.empty()) {
        std::cerr << "usage error: no output directory given\n";
        return kExitUsage;
    }
    for (const std::string& input : options.inputs) {
        if (detail::missing_file(input, "input curve")) return kExitUsage;
    }
    return detail::run_guarded([&options]() {
        ShapeDataset dataset;
        for (const std::string& input : options.inputs) {
            try {
                dataset.curves.push_back(resample(load_curve(input), options.points));
            } catch (const Error& e) {
                throw MalformedInputError(input + ": " + e.what());
            }
            dataset.labels.push_back(input);
        }
        const ProcrustesResult result = procrustes_align(dataset);

        detail::ensure_out_dir(options.out_dir);
        const std::filesystem::path out(options.out_dir);
        for (std::size_t i = 0; i < result.aligned.curves.size(); ++i) {
            save_curve_csv(result.aligned.curves[i],
                           (out / detail::indexed_name("aligned_", i, options.inputs[i],
                                                       ".csv"))
                               .string());
        }
        save_curve_csv(result.mean, (out / "mean.csv").string());

        nlohmann::json resolved;
        resolved["command"] = "align";
        resolved["inputs"] = options.inputs;
        resolved["points"] = options.points;
        resolved["iterations"] = result.iterations;
        write_json_file((out / "resolved_config.json").string(), resolved);
        return kExitOk;
    });
}

struct SimulateOptions {
    std::string config_path;
    std::string shape_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

// Simulates an ensemble of unconditioned paths from a start shape and writes
// per-path coefficient trajectories plus synthesized curve snapshots at the
// configured output times.
inline int cmd_simulate(const SimulateOptions& options) {
    if (detail::missing_file(options.config_path, "config file")) return kExitUsage;
    if (detail::missing_file(options.shape_path, "shape file")) return kExitUsage;
    if (options.out_dir.empty()) {
        std::cerr << "usage error: no output directory given\n";
        return kExitUsage;
    }
    return detail::run_guarded([&options]() {
        RunConfig config = load_run_config(options.config_path);
        detail::apply_overrides(config, options.seed, options.threads);
        const Eigen::VectorXd x0 = load_shape_state(options.shape_path, config.n_bases);
        const SdeSystem sys = make_system(config);

        detail::ensure_out_dir(options.out_dir);
        const std::filesystem::path out(options.out_dir);
        nlohmann::json resolved;
        resolved["command"] = "simulate";
        resolved["shape"] = options.shape_path;
        resolved["run"] = run_config_to_json(config);
        write_json_file((out / "resolved_config.json").string(), resolved);

        std::vector<Trajectory> paths;
        try {
            paths = simulate_ensemble(sys, x0, config.steps, config.n_paths,
                                      CounterRng(config.seed, 0), config.threads);
        } catch (const NumericalBlowupError& e) {
            const double dt = config.horizon / static_cast<double>(config.steps);
            throw NumericalBlowupError(
                std::string(e.what()) + " (step index " +
                    std::to_string(static_cast<long>(std::lround(e.time() / dt))) + ")",
                e.time(), e.magnitude());
        }

        const std::vector<int> indices = snapshot_indices(config.output_times, config.steps);
        for (std::size_t p = 0; p < paths.size(); ++p) {
            write_trajectory_csv(
                (out / detail::indexed_name("trajectory_", p, "", ".csv")).string(),
                paths[p]);
            std::vector<std::pair<double, PlanarCurve>> snapshots;
            for (int index : indices) {
                const FourierShape shape =
                    FourierShape::unflatten(paths[p].states[index], config.n_bases);
                snapshots.emplace_back(paths[p].times[index],
                                       fourier_to_curve(shape, config.eval.synthesis_points));
            }
            write_curve_snapshots_csv(
                (out / detail::indexed_name("snapshots_", p, "", ".csv")).string(),
                snapshots);
        }
        return kExitOk;
    });
}

struct TrainOptions {
    std::string config_path;
    std::string target_path;  // anchor shape: training trajectories start here
    std::string start_path;   // optional: recorded for a later bridge run
    std::string resume_path;  // optional checkpoint to continue from
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

// Trains the time-reversal score anchored at the target shape, writing the
// per-epoch loss curve, the checkpoint, and an evaluation report (RMSE
// against the closed-form transition score when the system has one).
inline int cmd_train(const TrainOptions& options) {
    if (detail::missing_file(options.config_path, "config file")) return kExitUsage;
    if (detail::missing_file(options.target_path, "target shape file")) return kExitUsage;
    if (!options.start_path.empty() &&
        detail::missing_file(options.start_path, "start shape file")) {
        return kExitUsage;
    }
    if (!options.resume_path.empty() &&
        detail::missing_file(options.resume_path, "resume checkpoint")) {
        return kExitUsage;
    }
    if (options.out_dir.empty()) {
        std::cerr << "usage error: no output directory given\n";
        return kExitUsage;
    }
    return detail::run_guarded([&options]() {
        RunConfig config = load_run_config(options.config_path);
        detail::apply_overrides(config, options.seed, options.threads);
        if (!options.resume_path.empty()) config.resume_from = options.resume_path;

        const Eigen::VectorXd anchor = load_shape_state(options.target_path, config.n_bases);
        const SdeSystem sys = make_system(config);
        const NetworkPlan plan = fourier_plan(config.n_bases);

        TrainConfig train_config = config.train;
        train_config.seed = config.seed;
        train_config.validate();

        NetworkParams warm;
        const NetworkParams* warm_ptr = nullptr;
        if (!config.resume_from.empty()) {
            auto [loaded_plan, loaded_params] = load_checkpoint(config.resume_from);
            if (loaded_plan.io_dim != plan.io_dim || loaded_plan.down_dims != plan.down_dims ||
                loaded_plan.time_embed_dim != plan.time_embed_dim) {
                throw IncompatibleModelError(config.resume_from +
                                             ": checkpoint plan does not match this run");
            }
            warm = std::move(loaded_params);
            warm_ptr = &warm;
        }

        detail::ensure_out_dir(options.out_dir);
        const std::filesystem::path out(options.out_dir);
        nlohmann::json resolved;
        resolved["command"] = "train";
        resolved["target_shape"] = options.target_path;
        if (!options.start_path.empty()) resolved["start_shape"] = options.start_path;
        resolved["run"] = run_config_to_json(config);
        write_json_file((out / "resolved_config.json").string(), resolved);

        const TrainResult result =
            train(sys, anchor, plan, train_config, options.out_dir, config.threads, warm_ptr);

        nlohmann::json report;
        report["epochs"] = result.epochs;
        report["optimizer_steps"] = result.params.step_count;
        report["final_loss"] = result.epoch_losses.back();
        report["ridge_applied"] = result.ridge_applied;
        report["train_wall_time_seconds"] = result.wall_time_seconds;
        if (config.system == "bm") {
            const ScoreProvider oracle = detail::bm_transition_oracle(anchor, config.sigma);
            const Eigen::MatrixXd synthesis =
                fourier_synthesis_matrix(config.n_bases, config.eval.synthesis_points);
            const EvalReport eval =
                eval_rmse(result.params, plan, oracle, sys, anchor, config.eval.n_points,
                          config.eval.n_times, config.eval.n_steps,
                          CounterRng(config.seed, 1), synthesis);
            report["rmse"] = eval.rmse;
            report["n_eval_points"] = eval.n_eval_points;
            report["eval_wall_time_seconds"] = eval.wall_time_seconds;
        } else {
            report["rmse"] = nullptr;
            report["note"] = "no closed-form score oracle for this system";
        }
        write_json_file((out / "eval_report.json").string(), report);
        return kExitOk;
    });
}

struct BridgeOptions {
    std::string config_path;
    std::string start_path;
    std::string target_path;      // overrides config.bridge.target_shape when set
    std::string checkpoint_path;  // learned score; empty = closed form
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

// Conditions the configured system on hitting the target shape and simulates
// an ensemble of bridges, writing every path, the per-time mean shape, and
// endpoint-distance statistics.
inline int cmd_bridge(const BridgeOptions& options) {
    if (detail::missing_file(options.config_path, "config file")) return kExitUsage;
    if (detail::missing_file(options.start_path, "start shape file")) return kExitUsage;
    if (!options.checkpoint_path.empty() &&
        detail::missing_file(options.checkpoint_path, "checkpoint")) {
        return kExitUsage;
    }
    if (options.out_dir.empty()) {
        std::cerr << "usage error: no output directory given\n";
        return kExitUsage;
    }
    return detail::run_guarded([&options]() {
        RunConfig config = load_run_config(options.config_path);
        detail::apply_overrides(config, options.seed, options.threads);
        const std::string target_path =
            options.target_path.empty() ? config.bridge.target_shape : options.target_path;
        if (target_path.empty() || !std::filesystem::exists(target_path)) {
            std::cerr << "usage error: target shape file not found: "
                      << (target_path.empty() ? "(none given)" : target_path) << "\n";
            return kExitUsage;
        }
        config.bridge.target_shape = target_path;

        const Eigen::VectorXd x0 = load_shape_state(options.start_path, config.n_bases);
        const Eigen::VectorXd target_state = load_shape_state(target_path, config.n_bases);
        const SdeSystem sys = make_system(config);

        BridgeTarget target;
        target.mode =
            config.bridge.mode == "exact" ? TargetMode::Exact : TargetMode::Inexact;
        target.target = target_state;
        target.obs_variance = config.bridge.obs_variance;
        target.validate();

        ScoreProvider provider;
        if (!options.checkpoint_path.empty()) {
            auto [plan, params] = load_checkpoint(options.checkpoint_path);
            if (plan.io_dim != sys.state_dim) {
                throw IncompatibleModelError(
                    options.checkpoint_path + ": checkpoint io dimension " +
                    std::to_string(plan.io_dim) + " does not match the state dimension " +
                    std::to_string(sys.state_dim));
            }
            provider = reversal_bridge_provider(params, plan, config.horizon);
        } else {
            if (config.system != "bm") {
                throw MalformedInputError(
                    "closed-form conditioning exists only for the bm system; pass a "
                    "trained checkpoint for other systems");
            }
            const Eigen::MatrixXd c = config.sigma * config.sigma *
                                      Eigen::MatrixXd::Identity(sys.state_dim, sys.state_dim);
            provider = score_provider_for(target, c, config.horizon);
        }
        const bool divergence_term_omitted =
            provider.kind == ScoreKind::Learned && !sys.constant_diffusion;

        const std::vector<Trajectory> paths =
            simulate_bridge_ensemble(sys, provider, target_state, x0, config.steps,
                                     config.n_paths, CounterRng(config.seed, 0),
                                     config.threads);

        detail::ensure_out_dir(options.out_dir);
        const std::filesystem::path out(options.out_dir);
        nlohmann::json resolved;
        resolved["command"] = "bridge";
        resolved["start_shape"] = options.start_path;
        resolved["score_source"] =
            options.checkpoint_path.empty() ? "closed_form" : options.checkpoint_path;
        resolved["run"] = run_config_to_json(config);
        write_json_file((out / "resolved_config.json").string(), resolved);

        write_paths_csv((out / "bridge_paths.csv").string(), paths);

        const std::vector<int> indices = snapshot_indices(config.output_times, config.steps);
        std::vector<std::pair<double, PlanarCurve>> mean_snapshots;
        for (int index : indices) {
            const Eigen::VectorXd mean = detail::mean_state_at(paths, index);
            mean_snapshots.emplace_back(
                paths.front().times[index],
                fourier_to_curve(FourierShape::unflatten(mean, config.n_bases),
                                 config.eval.synthesis_points));
        }
        write_curve_snapshots_csv((out / "mean_shape.csv").string(), mean_snapshots);

        // Endpoint distances in curve space: the synthesis map turns
        // coefficient differences into point differences.
        const Eigen::MatrixXd synthesis =
            fourier_synthesis_matrix(config.n_bases, config.eval.synthesis_points);
        const double start_target = (synthesis * (x0 - target_state)).norm();
        Eigen::VectorXd mean_endpoint = detail::mean_state_at(paths, config.steps);
        double mean_dist = 0.0;
        double max_dist = 0.0;
        double spread = 0.0;
        nlohmann::json per_path = nlohmann::json::array();
        for (const auto& path : paths) {
            const double d = (synthesis * (path.states.back() - target_state)).norm();
            per_path.push_back(d);
            mean_dist += d;
            max_dist = std::max(max_dist, d);
            spread += (synthesis * (path.states.back() - mean_endpoint)).norm();
        }
        mean_dist /= static_cast<double>(paths.size());
        spread /= static_cast<double>(paths.size());

        nlohmann::json stats;
        stats["n_paths"] = config.n_paths;
        stats["score_kind"] = detail::score_kind_name(provider.kind);
        stats["divergence_term_omitted"] = divergence_term_omitted;
        stats["start_target_distance"] = start_target;
        stats["mean_endpoint_distance"] = mean_dist;
        stats["max_endpoint_distance"] = max_dist;
        stats["endpoint_spread"] = spread;
        if (start_target > 0.0) {
            stats["relative_mean_endpoint_distance"] = mean_dist / start_target;
            stats["relative_max_endpoint_distance"] = max_dist / start_target;
        }
        stats["per_path_endpoint_distance"] = per_path;
        write_json_file((out / "endpoint_stats.json").string(), stats);
        return kExitOk;
    });
}

struct EvalOptions {
    std::string config_path;
    std::string checkpoint_path;
    std::string anchor_path;  // shape the trained score was anchored at
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};

// Evaluates a trained checkpoint against the closed-form transition score of
// the plain Brownian system, writing the evaluation report.
inline int cmd_eval(const EvalOptions& options) {
    if (detail::missing_file(options.config_path, "config file")) return kExitUsage;
    if (detail::missing_file(options.checkpoint_path, "checkpoint")) return kExitUsage;
    if (detail::missing_file(options.anchor_path, "anchor shape file")) return kExitUsage;
    if (options.out_dir.empty()) {
        std::cerr << "usage error: no output directory given\n";
        return kExitUsage;
    }
    return detail::run_guarded([&options]() {
        RunConfig config = load_run_config(options.config_path);
        detail::apply_overrides(config, options.seed, std::nullopt);
        if (config.system != "bm") {
            throw MalformedInputError(
                "eval needs the closed-form oracle of the bm system; got \"" +
                config.system + "\"");
        }
        const Eigen::VectorXd anchor = load_shape_state(options.anchor_path, config.n_bases);
        const SdeSystem sys = make_system(config);
        auto [plan, params] = load_checkpoint(options.checkpoint_path);
        if (plan.io_dim != sys.state_dim) {
            throw IncompatibleModelError(options.checkpoint_path +
                                         ": checkpoint io dimension " +
                                         std::to_string(plan.io_dim) +
                                         " does not match the state dimension " +
                                         std::to_string(sys.state_dim));
        }

        const ScoreProvider oracle = detail::bm_transition_oracle(anchor, config.sigma);
        const Eigen::MatrixXd synthesis =
            fourier_synthesis_matrix(config.n_bases, config.eval.synthesis_points);
        const EvalReport eval =
            eval_rmse(params, plan, oracle, sys, anchor, config.eval.n_points,
                      config.eval.n_times, config.eval.n_steps, CounterRng(config.seed, 1),
                      synthesis);

        detail::ensure_out_dir(options.out_dir);
        const std::filesystem::path out(options.out_dir);
        nlohmann::json resolved;
        resolved["command"] = "eval";
        resolved["checkpoint"] = options.checkpoint_path;
        resolved["anchor_shape"] = options.anchor_path;
        resolved["run"] = run_config_to_json(config);
        write_json_file((out / "resolved_config.json").string(), resolved);

        nlohmann::json report;
        report["rmse"] = eval.rmse;
        report["n_eval_points"] = eval.n_eval_points;
        report["wall_time_seconds"] = eval.wall_time_seconds;
        report["optimizer_steps"] = params.step_count;
        write_json_file((out / "eval_report.json").string(), report);
        return kExitOk;
    });
}

}  // namespace shapebridge
