#pragma once

// Denoising score-matching training: one-step transition scores as
// regression targets, a diffusion-weighted quadratic loss with exact
// gradients, warmup-plus-cosine learning rate schedule, Adam, the training
// loop with per-epoch checkpoints, and RMSE evaluation against closed-form
// score oracles.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "shapebridge/bridge.hpp"
#include "shapebridge/errors.hpp"
#include "shapebridge/rng.hpp"
#include "shapebridge/score_net.hpp"
#include "shapebridge/sde.hpp"
#include "shapebridge/text.hpp"

namespace shapebridge {

struct TrainConfig {
    int epochs = 0;
    int batches_per_epoch = 40;
    int trajectories_per_batch = 50;
    int steps_per_trajectory = 100;
    double peak_lr = 1e-4;
    int warmup_steps = 500;
    double floor_lr = 1e-6;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 0;

    int total_steps() const { return epochs * batches_per_epoch; }

    void validate() const {
        if (epochs < 1) throw MalformedInputError("TrainConfig: epochs must be positive");
        if (batches_per_epoch < 1 || trajectories_per_batch < 1 || steps_per_trajectory < 1) {
            throw MalformedInputError("TrainConfig: counts must be positive");
        }
        if (!(peak_lr > floor_lr) || !(floor_lr > 0.0)) {
            throw MalformedInputError("TrainConfig: need peak_lr > floor_lr > 0");
        }
        if (warmup_steps < 1) {
            throw MalformedInputError("TrainConfig: warmup_steps must be >= 1");
        }
        if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) ||
            !(adam_beta2 > 0.0 && adam_beta2 < 1.0) || !(adam_epsilon > 0.0)) {
            throw MalformedInputError("TrainConfig: Adam constants out of range");
        }
    }
};

struct EvalReport {
    double rmse = 0.0;
    int n_eval_points = 0;
    double wall_time_seconds = 0.0;
    int epochs = 0;
};

// One-step transition scores of a simulated trajectory: at step k the Euler
// transition is Gaussian with mean x_{k-1} + b dt and covariance a dt, so
// -a^{-1}(x_k - x_{k-1} - b dt)/dt is the transition score at (t_k, x_k) and
// the regression target for the time-reversal score. The weight matrix is the
// same a, the natural metric of the transition's quadratic form.
struct DsmSequence {
    Eigen::VectorXd times;
    Eigen::MatrixXd states;   // one sample per column
    Eigen::MatrixXd targets;  // one target per column
    std::vector<Eigen::MatrixXd> weights;  // single entry when constant
    bool constant_weight = false;
    double dt = 0.0;
    double horizon = 0.0;
    bool ridge_applied = false;

    int size() const { return static_cast<int>(states.cols()); }

    const Eigen::MatrixXd& weight(int k) const {
        return constant_weight ? weights.front() : weights[k];
    }
};

namespace detail {

struct WeightSolver {
    Eigen::MatrixXd a;
    Eigen::LDLT<Eigen::MatrixXd> ldlt;
    bool ridged = false;
};

inline WeightSolver make_weight_solver(Eigen::MatrixXd a) {
    WeightSolver solver;
    solver.ldlt.compute(a);
    if (solver.ldlt.info() != Eigen::Success || !solver.ldlt.isPositive() ||
        solver.ldlt.vectorD().minCoeff() <= 0.0) {
        const double ridge =
            1e-10 * a.trace() / static_cast<double>(a.rows());
        a.diagonal().array() += ridge > 0.0 ? ridge : 1e-10;
        solver.ldlt.compute(a);
        solver.ridged = true;
        if (solver.ldlt.info() != Eigen::Success ||
            solver.ldlt.vectorD().minCoeff() <= 0.0) {
            throw IllConditionedError(
                "dsm_targets: diffusion-squared is singular beyond ridge repair");
        }
    }
    solver.a = std::move(a);
    return solver;
}

}  // namespace detail

inline DsmSequence dsm_targets(const Trajectory& traj, const SdeSystem& sys) {
    const int n_steps = traj.steps();
    if (n_steps < 1) throw MalformedInputError("dsm_targets: empty trajectory");
    const int dim = sys.state_dim;
    if (traj.states.front().size() != dim) {
        throw MalformedInputError("dsm_targets: trajectory dimension mismatch");
    }

    DsmSequence seq;
    seq.dt = traj.times[1] - traj.times[0];
    seq.horizon = sys.horizon;
    seq.times.resize(n_steps);
    seq.states.resize(dim, n_steps);
    seq.targets.resize(dim, n_steps);
    seq.constant_weight = sys.constant_diffusion;

    detail::WeightSolver solver;
    if (seq.constant_weight) {
        solver = detail::make_weight_solver(sys.diffusion_sq(0.0, traj.states.front()));
        seq.weights.push_back(solver.a);
        seq.ridge_applied = solver.ridged;
    }

    for (int k = 1; k <= n_steps; ++k) {
        const Eigen::VectorXd& prev = traj.states[k - 1];
        const double t_prev = traj.times[k - 1];
        if (!seq.constant_weight) {
            solver = detail::make_weight_solver(sys.diffusion_sq(t_prev, prev));
            seq.weights.push_back(solver.a);
            seq.ridge_applied = seq.ridge_applied || solver.ridged;
        }
        const Eigen::VectorXd residual =
            traj.states[k] - prev - sys.drift(t_prev, prev) * seq.dt;
        seq.times[k - 1] = traj.times[k];
        seq.states.col(k - 1) = traj.states[k];
        seq.targets.col(k - 1) = -solver.ldlt.solve(residual) / seq.dt;
    }
    return seq;
}

// Concatenation of per-trajectory target sequences into one training batch.
inline DsmSequence make_dsm_batch(const std::vector<Trajectory>& trajectories,
                                  const SdeSystem& sys) {
    if (trajectories.empty()) throw MalformedInputError("make_dsm_batch: no trajectories");
    std::vector<DsmSequence> parts;
    parts.reserve(trajectories.size());
    int total = 0;
    for (const auto& traj : trajectories) {
        parts.push_back(dsm_targets(traj, sys));
        total += parts.back().size();
    }
    DsmSequence batch;
    batch.dt = parts.front().dt;
    batch.horizon = parts.front().horizon;
    batch.constant_weight = parts.front().constant_weight;
    if (batch.constant_weight) batch.weights.push_back(parts.front().weights.front());
    batch.times.resize(total);
    batch.states.resize(sys.state_dim, total);
    batch.targets.resize(sys.state_dim, total);
    int at = 0;
    for (const auto& part : parts) {
        batch.ridge_applied = batch.ridge_applied || part.ridge_applied;
        batch.times.segment(at, part.size()) = part.times;
        batch.states.middleCols(at, part.size()) = part.states;
        batch.targets.middleCols(at, part.size()) = part.targets;
        if (!batch.constant_weight) {
            batch.weights.insert(batch.weights.end(), part.weights.begin(),
                                 part.weights.end());
        }
        at += part.size();
    }
    return batch;
}

struct DsmLoss {
    double loss = 0.0;
    Eigen::VectorXd grad;
};

// Mean over samples of dt (s - target)^T a (s - target), with gradients
// through the train-mode forward pass. Network time input is normalized by
// the horizon.
inline DsmLoss dsm_loss(NetworkParams& params, const NetworkPlan& plan,
                        const DsmSequence& batch) {
    if (batch.size() < 1) throw MalformedInputError("dsm_loss: empty batch");
    const int n = batch.size();
    const Eigen::VectorXd times_norm = batch.times / batch.horizon;

    ForwardCache cache;
    const Eigen::MatrixXd scores =
        forward_batch(params, plan, times_norm, batch.states, ForwardMode::Train, &cache);
    const Eigen::MatrixXd residual = scores - batch.targets;

    Eigen::MatrixXd weighted(residual.rows(), residual.cols());
    if (batch.constant_weight) {
        weighted = batch.weight(0) * residual;
    } else {
        for (int k = 0; k < n; ++k) weighted.col(k) = batch.weight(k) * residual.col(k);
    }
    const double loss =
        batch.dt * (residual.array() * weighted.array()).sum() / static_cast<double>(n);
    const Eigen::MatrixXd upstream = (2.0 * batch.dt / static_cast<double>(n)) * weighted;
    return {loss, backward_batch(params, plan, cache, upstream)};
}

// Linear warmup to the peak, then cosine decay to the floor; steps past the
// last scheduled one stay at the floor.
inline double lr_schedule(int step, const TrainConfig& config) {
    config.validate();
    if (step < 1) throw MalformedInputError("lr_schedule: steps count from 1");
    if (step <= config.warmup_steps) {
        return config.peak_lr * static_cast<double>(step) /
               static_cast<double>(config.warmup_steps);
    }
    const int total = config.total_steps();
    if (step >= total) return config.floor_lr;
    const double progress = static_cast<double>(step - config.warmup_steps) /
                            static_cast<double>(total - config.warmup_steps);
    return config.floor_lr +
           (config.peak_lr - config.floor_lr) * 0.5 * (1.0 + std::cos(M_PI * progress));
}

struct AdamState {
    Eigen::VectorXd first_moment;
    Eigen::VectorXd second_moment;
    long step = 0;
};

inline void adam_step(NetworkParams& params, const Eigen::VectorXd& grads, AdamState& state,
                      double lr, const TrainConfig& config) {
    if (grads.size() != params.values.size()) {
        throw MalformedInputError("adam_step: gradient size mismatch");
    }
    if (state.first_moment.size() != grads.size()) {
        state.first_moment = Eigen::VectorXd::Zero(grads.size());
        state.second_moment = Eigen::VectorXd::Zero(grads.size());
    }
    state.step += 1;
    state.first_moment = config.adam_beta1 * state.first_moment +
                         (1.0 - config.adam_beta1) * grads;
    state.second_moment =
        (config.adam_beta2 * state.second_moment.array() +
         (1.0 - config.adam_beta2) * grads.array().square())
            .matrix();
    const double bias1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(state.step));
    params.values.array() -=
        lr * (state.first_moment.array() / bias1) /
        ((state.second_moment.array() / bias2).sqrt() + config.adam_epsilon);
    params.step_count = state.step;
}

struct TrainResult {
    NetworkParams params;
    std::vector<double> epoch_losses;
    std::vector<double> epoch_lrs;
    double wall_time_seconds = 0.0;
    int epochs = 0;
    bool ridge_applied = false;
};

namespace detail {

inline void write_loss_csv(const std::string& path, const std::vector<double>& losses,
                           const std::vector<double>& lrs) {
    std::string csv = "epoch,mean_loss,lr\n";
    for (std::size_t e = 0; e < losses.size(); ++e) {
        csv += std::to_string(e + 1) + "," + text::format_double(losses[e]) + "," +
               text::format_double(lrs[e]) + "\n";
    }
    text::write_file(path, csv);
}

}  // namespace detail

// Full training loop: every batch simulates fresh trajectories from x0,
// builds denoising targets, and applies one Adam step. When out_dir is
// nonempty, each epoch rewrites <out_dir>/loss.csv and the checkpoint. A
// warm start resumes from existing parameters: the step counter continues
// monotonically, while optimizer moments restart (they are not part of the
// checkpoint format).
inline TrainResult train(const SdeSystem& sys, const Eigen::VectorXd& x0,
                         const NetworkPlan& plan, const TrainConfig& config,
                         const std::string& out_dir = "", int n_threads = 1,
                         const NetworkParams* warm_start = nullptr) {
    config.validate();
    plan.validate();
    if (x0.size() != sys.state_dim) {
        throw MalformedInputError("train: x0 does not match the system dimension");
    }
    if (plan.io_dim != sys.state_dim) {
        throw IncompatibleModelError("train: plan io_dim " + std::to_string(plan.io_dim) +
                                     " does not match state dimension " +
                                     std::to_string(sys.state_dim));
    }
    const auto start = std::chrono::steady_clock::now();

    const CounterRng base(config.seed, 0);
    CounterRng init_rng = base.split(0);
    TrainResult result;
    AdamState adam;
    if (warm_start != nullptr) {
        const NetworkLayout layout = make_layout(plan);
        if (warm_start->values.size() != layout.total) {
            throw IncompatibleModelError(
                "train: warm-start parameters hold " +
                std::to_string(warm_start->values.size()) + " values, plan needs " +
                std::to_string(layout.total));
        }
        result.params = *warm_start;
        adam.step = result.params.step_count;
    } else {
        result.params = init_params(plan, init_rng);
    }

    int global_step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double epoch_loss = 0.0;
        double last_lr = 0.0;
        for (int b = 0; b < config.batches_per_epoch; ++b) {
            global_step += 1;
            const auto paths = simulate_ensemble(
                sys, x0, config.steps_per_trajectory, config.trajectories_per_batch,
                base.split(static_cast<std::uint64_t>(global_step)), n_threads);
            const DsmSequence batch = make_dsm_batch(paths, sys);
            result.ridge_applied = result.ridge_applied || batch.ridge_applied;

            const DsmLoss step_loss = dsm_loss(result.params, plan, batch);
            if (!std::isfinite(step_loss.loss)) {
                throw NumericalBlowupError(
                    "train: non-finite loss at step " + std::to_string(global_step),
                    batch.times.mean(), std::numeric_limits<double>::infinity());
            }
            last_lr = lr_schedule(global_step, config);
            adam_step(result.params, step_loss.grad, adam, last_lr, config);
            epoch_loss += step_loss.loss;
        }
        result.epoch_losses.push_back(epoch_loss / config.batches_per_epoch);
        result.epoch_lrs.push_back(last_lr);
        if (!out_dir.empty()) {
            detail::write_loss_csv(out_dir + "/loss.csv", result.epoch_losses,
                                   result.epoch_lrs);
            save_checkpoint(out_dir + "/checkpoint.ckpt", plan, result.params);
        }
    }

    result.epochs = config.epochs;
    result.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

// Synthesis map from flattened coefficient states [Re x | Im x | Re y | Im y]
// to n_points curve samples per coordinate, the fixed comparison space for
// coefficient-space scores.
inline Eigen::MatrixXd fourier_synthesis_matrix(int n_bases, int n_points) {
    if (n_bases < 1 || n_points < 1) {
        throw MalformedInputError("fourier_synthesis_matrix: counts must be positive");
    }
    Eigen::MatrixXd map = Eigen::MatrixXd::Zero(2 * n_points, 4 * n_bases);
    for (int p = 0; p < n_points; ++p) {
        const double theta = 2.0 * M_PI * p / n_points;
        map(p, 0) = 1.0;
        map(n_points + p, 2 * n_bases) = 1.0;
        for (int n = 1; n < n_bases; ++n) {
            const double c = 2.0 * std::cos(n * theta);
            const double s = -2.0 * std::sin(n * theta);
            map(p, n) = c;
            map(p, n_bases + n) = s;
            map(n_points + p, 2 * n_bases + n) = c;
            map(n_points + p, 3 * n_bases + n) = s;
        }
    }
    return map;
}

using BatchScoreFn = std::function<Eigen::MatrixXd(double, const Eigen::MatrixXd&)>;

namespace detail {

// Shared evaluation core: states sampled from unconditioned trajectories at
// uniform interior times, both scores optionally pushed through a synthesis
// map, RMSE over all samples and components.
inline EvalReport eval_rmse_core(const BatchScoreFn& candidate, const ScoreProvider& oracle,
                                 const SdeSystem& sys, const Eigen::VectorXd& x0,
                                 int n_points, int n_times, int n_steps,
                                 const CounterRng& base_rng,
                                 const Eigen::MatrixXd& synthesis) {
    if (n_points < 1 || n_times < 1 || n_steps < 1) {
        throw MalformedInputError("eval_rmse: counts must be positive");
    }
    const auto start = std::chrono::steady_clock::now();
    const double dt = sys.horizon / static_cast<double>(n_steps);
    const bool synthesize = synthesis.size() > 0;
    if (synthesize && synthesis.cols() != sys.state_dim) {
        throw MalformedInputError("eval_rmse: synthesis map does not match the state");
    }

    const auto paths = simulate_ensemble(sys, x0, n_steps, n_points, base_rng);

    double total_sq = 0.0;
    long total_components = 0;
    for (int j = 0; j < n_times; ++j) {
        const double frac =
            n_times == 1 ? 0.5 : 0.05 + 0.9 * static_cast<double>(j) / (n_times - 1);
        const int idx = std::clamp(
            static_cast<int>(std::lround(frac * sys.horizon / dt)), 1, n_steps - 1);
        const double t = dt * idx;

        Eigen::MatrixXd states(sys.state_dim, n_points);
        for (int p = 0; p < n_points; ++p) states.col(p) = paths[p].states[idx];
        const Eigen::MatrixXd predicted = candidate(t, states);
        if (predicted.rows() != sys.state_dim || predicted.cols() != n_points) {
            throw MalformedInputError("eval_rmse: candidate returned a wrong shape");
        }
        Eigen::MatrixXd reference(sys.state_dim, n_points);
        for (int p = 0; p < n_points; ++p) {
            reference.col(p) = oracle.evaluate(t, states.col(p));
        }
        Eigen::MatrixXd diff = predicted - reference;
        if (synthesize) diff = synthesis * diff;
        total_sq += diff.squaredNorm();
        total_components += diff.size();
    }

    EvalReport report;
    report.rmse = std::sqrt(total_sq / static_cast<double>(total_components));
    report.n_eval_points = n_times * n_points;
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace detail

inline EvalReport eval_rmse(const BatchScoreFn& candidate, const ScoreProvider& oracle,
                            const SdeSystem& sys, const Eigen::VectorXd& x0, int n_points,
                            int n_times, int n_steps, const CounterRng& rng,
                            const Eigen::MatrixXd& synthesis = Eigen::MatrixXd()) {
    return detail::eval_rmse_core(candidate, oracle, sys, x0, n_points, n_times, n_steps,
                                  rng, synthesis);
}

inline EvalReport eval_rmse(const NetworkParams& params, const NetworkPlan& plan,
                            const ScoreProvider& oracle, const SdeSystem& sys,
                            const Eigen::VectorXd& x0, int n_points, int n_times,
                            int n_steps, const CounterRng& rng,
                            const Eigen::MatrixXd& synthesis = Eigen::MatrixXd()) {
    const double horizon = sys.horizon;
    BatchScoreFn candidate = [&params, &plan, horizon](double t, const Eigen::MatrixXd& x) {
        NetworkParams& mutable_params = const_cast<NetworkParams&>(params);
        const Eigen::VectorXd times = Eigen::VectorXd::Constant(x.cols(), t / horizon);
        return forward_batch(mutable_params, plan, times, x, ForwardMode::Eval);
    };
    return detail::eval_rmse_core(candidate, oracle, sys, x0, n_points, n_times, n_steps,
                                  rng, synthesis);
}

// Bridging provider for a network trained on trajectories anchored at the
// bridge target: the trained score approximates the transition score from
// the anchor, and running the conditioned forward system toward that anchor
// evaluates it at the remaining time. The network sees (horizon - t) /
// horizon as its normalized time input.
inline ScoreProvider reversal_bridge_provider(const NetworkParams& params,
                                              const NetworkPlan& plan, double horizon) {
    plan.validate();
    NetworkParams shared = params;
    return ScoreProvider{
        ScoreKind::Learned,
        [shared, plan, horizon](double t, const Eigen::VectorXd& x) mutable {
            if (t < 0.0 || t > horizon) {
                throw HorizonError("reversal_bridge_provider: t outside [0, horizon]");
            }
            return forward_eval(shared, plan, (horizon - t) / horizon, x);
        }};
}

}  // namespace shapebridge
