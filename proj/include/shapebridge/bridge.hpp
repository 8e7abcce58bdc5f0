#pragma once

// Endpoint conditioning of SDE systems: closed-form score functions for
// Brownian systems (exact and inexact endpoint matching), score-augmented
// drift, bridge path sampling with a terminal-step guard, Monte Carlo
// h-estimation, and the projection-equivalence check for conditioning that
// constrains only the leading coefficients.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "shapebridge/errors.hpp"
#include "shapebridge/rng.hpp"
#include "shapebridge/sde.hpp"
#include "shapebridge/stats.hpp"

namespace shapebridge {

enum class ScoreKind { ClosedFormExact, ClosedFormInexact, Learned, MonteCarlo };

// Immutable score oracle: evaluate(t, x) returns the gradient of log h at the
// state, the drift correction direction of the conditioned system.
struct ScoreProvider {
    ScoreKind kind = ScoreKind::ClosedFormExact;
    std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> evaluate;
};

enum class TargetMode { Exact, Inexact };

struct BridgeTarget {
    TargetMode mode = TargetMode::Exact;
    Eigen::VectorXd target;
    double obs_variance = 0.0;

    void validate() const {
        if (target.size() == 0) throw MalformedInputError("BridgeTarget: empty target");
        if (!target.allFinite()) throw MalformedInputError("BridgeTarget: non-finite target");
        if (mode == TargetMode::Inexact && !(obs_variance > 0.0)) {
            throw MalformedInputError(
                "BridgeTarget: inexact matching needs obs_variance > 0");
        }
    }
};

namespace detail {

inline Eigen::LDLT<Eigen::MatrixXd> factor_spd(const Eigen::MatrixXd& m,
                                               const std::string& who) {
    if (m.rows() != m.cols()) {
        throw MalformedInputError(who + ": covariance must be square");
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 0.0) {
        throw IllConditionedError(who + ": covariance is not positive definite");
    }
    return ldlt;
}

}  // namespace detail

// Score of the transition density of Brownian motion with covariance rate C,
// pinned to hit y at time T: C^{-1} (y - x) / (T - t).
inline Eigen::VectorXd bm_exact_bridge_score(const Eigen::VectorXd& x, double t,
                                             const Eigen::VectorXd& y,
                                             const Eigen::MatrixXd& c, double horizon) {
    if (x.size() != y.size() || x.size() != c.rows()) {
        throw MalformedInputError("bm_exact_bridge_score: dimension mismatch");
    }
    if (!(t < horizon)) {
        throw HorizonError("bm_exact_bridge_score: t = " + std::to_string(t) +
                           " is not before the horizon " + std::to_string(horizon));
    }
    auto ldlt = detail::factor_spd(c, "bm_exact_bridge_score");
    return ldlt.solve(y - x) / (horizon - t);
}

// Score of log E[k(V, X(T)) | X(t) = x] for Brownian motion with covariance
// rate C and a Gaussian observation kernel of variance obs_variance: the
// convolution is Gaussian, so the score is -(obs_variance I + (T-t) C)^{-1}(x - V).
inline Eigen::VectorXd bm_inexact_score(const Eigen::VectorXd& x, double t,
                                        const Eigen::VectorXd& v, double obs_variance,
                                        const Eigen::MatrixXd& c, double horizon) {
    if (x.size() != v.size() || x.size() != c.rows()) {
        throw MalformedInputError("bm_inexact_score: dimension mismatch");
    }
    if (t > horizon) {
        throw HorizonError("bm_inexact_score: t = " + std::to_string(t) +
                           " is past the horizon " + std::to_string(horizon));
    }
    if (!(obs_variance > 0.0)) {
        throw MalformedInputError("bm_inexact_score: obs_variance must be positive");
    }
    const int n = static_cast<int>(x.size());
    Eigen::MatrixXd blended =
        obs_variance * Eigen::MatrixXd::Identity(n, n) + (horizon - t) * c;
    auto ldlt = detail::factor_spd(blended, "bm_inexact_score");
    return -ldlt.solve(x - v);
}

// The matching analytic h for bm_inexact_score: the Gaussian kernel
// (2 pi s)^{-1/2} exp(-|x - V|^2 / (2 s)) convolved with the Brownian
// transition N(x, (T-t) C).
inline double bm_gaussian_h(const Eigen::VectorXd& x, double t, const Eigen::VectorXd& v,
                            double obs_variance, const Eigen::MatrixXd& c, double horizon) {
    if (x.size() != v.size() || x.size() != c.rows()) {
        throw MalformedInputError("bm_gaussian_h: dimension mismatch");
    }
    if (t > horizon) {
        throw HorizonError("bm_gaussian_h: t is past the horizon");
    }
    const int n = static_cast<int>(x.size());
    Eigen::MatrixXd blended =
        obs_variance * Eigen::MatrixXd::Identity(n, n) + (horizon - t) * c;
    auto ldlt = detail::factor_spd(blended, "bm_gaussian_h");
    const double quad = (x - v).dot(ldlt.solve(x - v));
    const double log_det = ldlt.vectorD().array().log().sum();
    // (2 pi s)^{(n-1)/2} N(V; x, blended): the kernel normalization is
    // dimension-independent, the transition's is not.
    const double log_h = 0.5 * (n - 1) * std::log(2.0 * M_PI * obs_variance) -
                         0.5 * n * std::log(2.0 * M_PI) - 0.5 * log_det - 0.5 * quad;
    return std::exp(log_h);
}

// Gaussian observation kernel psi(x) = (2 pi s)^{-1/2} exp(-|x - V|^2 / (2 s)).
inline std::function<double(const Eigen::VectorXd&)> gaussian_kernel_psi(
    const Eigen::VectorXd& v, double obs_variance) {
    if (!(obs_variance > 0.0)) {
        throw MalformedInputError("gaussian_kernel_psi: obs_variance must be positive");
    }
    return [v, obs_variance](const Eigen::VectorXd& x) {
        if (x.size() != v.size()) {
            throw MalformedInputError("gaussian_kernel_psi: dimension mismatch");
        }
        return std::exp(-(x - v).squaredNorm() / (2.0 * obs_variance)) /
               std::sqrt(2.0 * M_PI * obs_variance);
    };
}

inline ScoreProvider bm_exact_score_provider(const Eigen::VectorXd& y,
                                             const Eigen::MatrixXd& c, double horizon) {
    auto ldlt = detail::factor_spd(c, "bm_exact_score_provider");
    return ScoreProvider{
        ScoreKind::ClosedFormExact,
        [y, ldlt, horizon](double t, const Eigen::VectorXd& x) -> Eigen::VectorXd {
            if (x.size() != y.size()) {
                throw MalformedInputError("bm_exact_score_provider: dimension mismatch");
            }
            if (!(t < horizon)) {
                throw HorizonError("bm_exact_score_provider: t is not before the horizon");
            }
            return ldlt.solve(y - x) / (horizon - t);
        }};
}

inline ScoreProvider bm_inexact_score_provider(const Eigen::VectorXd& v, double obs_variance,
                                               const Eigen::MatrixXd& c, double horizon) {
    if (!(obs_variance > 0.0)) {
        throw MalformedInputError("bm_inexact_score_provider: obs_variance must be positive");
    }
    detail::factor_spd(c, "bm_inexact_score_provider");
    Eigen::MatrixXd cov = c;
    return ScoreProvider{
        ScoreKind::ClosedFormInexact,
        [v, obs_variance, cov, horizon](double t, const Eigen::VectorXd& x) {
            return bm_inexact_score(x, t, v, obs_variance, cov, horizon);
        }};
}

// Score for a target constraining only the first kept_n coefficients of an
// independent-coordinate Brownian system: the leading block follows the
// projected exact bridge score, every unconstrained component gets zero.
inline ScoreProvider cylindrical_score_provider(int full_dim, int kept_n,
                                                const Eigen::VectorXd& target_head,
                                                const Eigen::MatrixXd& c_head,
                                                double horizon) {
    if (kept_n < 1 || kept_n > full_dim) {
        throw MalformedInputError("cylindrical_score_provider: kept_n out of range");
    }
    if (target_head.size() != kept_n || c_head.rows() != kept_n) {
        throw MalformedInputError("cylindrical_score_provider: head dimension mismatch");
    }
    auto ldlt = detail::factor_spd(c_head, "cylindrical_score_provider");
    return ScoreProvider{
        ScoreKind::ClosedFormExact,
        [full_dim, kept_n, target_head, ldlt, horizon](
            double t, const Eigen::VectorXd& x) -> Eigen::VectorXd {
            if (x.size() != full_dim) {
                throw MalformedInputError("cylindrical_score_provider: dimension mismatch");
            }
            if (!(t < horizon)) {
                throw HorizonError("cylindrical_score_provider: t is not before the horizon");
            }
            Eigen::VectorXd score = Eigen::VectorXd::Zero(full_dim);
            score.head(kept_n) =
                ldlt.solve(target_head - x.head(kept_n)) / (horizon - t);
            return score;
        }};
}

// Provider for a declared target: exact mode pins the endpoint, inexact mode
// matches a Gaussian observation of variance obs_variance.
inline ScoreProvider score_provider_for(const BridgeTarget& target, const Eigen::MatrixXd& c,
                                        double horizon) {
    target.validate();
    if (target.mode == TargetMode::Exact) {
        return bm_exact_score_provider(target.target, c, horizon);
    }
    return bm_inexact_score_provider(target.target, target.obs_variance, c, horizon);
}

// Cross-validation oracle: central finite differences of log of the Monte
// Carlo h-estimate, with common random numbers across all evaluations. Cost
// grows exponentially with dimension; intended for dimensions <= 3.
struct McEstimate {
    double value = 0.0;
    double standard_error = 0.0;
    int n_paths = 0;
};

// Monte Carlo estimate of E[psi(X(T))] over unconditioned paths of duration
// horizon - t started at xi. t = horizon needs no integration and returns
// psi(xi) with zero standard error.
inline McEstimate mc_h_estimate(const SdeSystem& sys, double t, const Eigen::VectorXd& xi,
                                const std::function<double(const Eigen::VectorXd&)>& psi,
                                int n_paths, int n_steps, const CounterRng& base_rng) {
    if (t > sys.horizon) {
        throw HorizonError("mc_h_estimate: t is past the horizon");
    }
    if (n_paths < 1) throw MalformedInputError("mc_h_estimate: need at least one path");
    const double duration = sys.horizon - t;
    if (duration == 0.0) return {psi(xi), 0.0, n_paths};

    // Restart clock at the offset so time-dependent coefficients see the
    // correct absolute time.
    SdeSystem shifted = sys;
    shifted.horizon = duration;
    shifted.drift = [&sys, t](double s, const Eigen::VectorXd& x) {
        return sys.drift(t + s, x);
    };
    shifted.diffusion = [&sys, t](double s, const Eigen::VectorXd& x) {
        return sys.diffusion(t + s, x);
    };
    if (sys.diffusion_squared) {
        shifted.diffusion_squared = [&sys, t](double s, const Eigen::VectorXd& x) {
            return sys.diffusion_squared(t + s, x);
        };
    }

    std::vector<double> values(n_paths);
    for (int p = 0; p < n_paths; ++p) {
        CounterRng rng = base_rng.split(static_cast<std::uint64_t>(p));
        Trajectory traj = simulate(shifted, xi, n_steps, rng);
        values[p] = psi(traj.states.back());
    }
    const double value = mean_of(values);
    const double se = n_paths > 1 ? standard_error_of(values) : 0.0;
    return {value, se, n_paths};
}

inline ScoreProvider mc_score_provider(const SdeSystem& sys,
                                       const std::function<double(const Eigen::VectorXd&)>& psi,
                                       int n_paths, int n_steps, double fd_step,
                                       const CounterRng& base_rng) {
    if (!(fd_step > 0.0)) {
        throw MalformedInputError("mc_score_provider: fd_step must be positive");
    }
    return ScoreProvider{
        ScoreKind::MonteCarlo,
        [sys, psi, n_paths, n_steps, fd_step, base_rng](
            double t, const Eigen::VectorXd& x) -> Eigen::VectorXd {
            Eigen::VectorXd score(x.size());
            Eigen::VectorXd probe = x;
            for (int i = 0; i < x.size(); ++i) {
                probe[i] = x[i] + fd_step;
                const double up =
                    mc_h_estimate(sys, t, probe, psi, n_paths, n_steps, base_rng).value;
                probe[i] = x[i] - fd_step;
                const double down =
                    mc_h_estimate(sys, t, probe, psi, n_paths, n_steps, base_rng).value;
                probe[i] = x[i];
                if (!(up > 0.0) || !(down > 0.0)) {
                    throw NumericalBlowupError(
                        "mc_score_provider: h-estimate is not positive", t, 0.0);
                }
                score[i] = (std::log(up) - std::log(down)) / (2.0 * fd_step);
            }
            return score;
        }};
}

// New system whose drift gains diffusion_squared(t, x) * score(t, x); the
// diffusion itself is unchanged.
inline SdeSystem conditioned_system(const SdeSystem& sys, ScoreProvider score) {
    SdeSystem out = sys;
    auto base_drift = sys.drift;
    auto diffusion_sq = [sys](double t, const Eigen::VectorXd& x) {
        return sys.diffusion_sq(t, x);
    };
    const int dim = sys.state_dim;
    out.drift = [base_drift, diffusion_sq, score = std::move(score), dim](
                    double t, const Eigen::VectorXd& x) -> Eigen::VectorXd {
        Eigen::VectorXd s = score.evaluate(t, x);
        if (s.size() != dim) {
            throw MalformedInputError("conditioned_system: score has dimension " +
                                      std::to_string(s.size()) + ", system expects " +
                                      std::to_string(dim));
        }
        return base_drift(t, x) + diffusion_sq(t, x) * s;
    };
    return out;
}

// One conditioned Euler-Maruyama step. The score drift is capped so its
// length never exceeds the remaining distance to the target plus one noise
// standard deviation; the exact score grows like 1/(horizon - t), and without
// the cap the final step can overshoot arbitrarily.
inline Eigen::VectorXd bridge_step(const SdeSystem& sys, const ScoreProvider& score,
                                   const Eigen::VectorXd& target, double t,
                                   const Eigen::VectorXd& x, double dt,
                                   const Eigen::VectorXd& noise_increment) {
    if (x.size() != sys.state_dim || target.size() != sys.state_dim) {
        throw MalformedInputError("bridge_step: dimension mismatch");
    }
    const Eigen::MatrixXd a = sys.diffusion_sq(t, x);
    Eigen::VectorXd score_drift = a * score.evaluate(t, x) * dt;
    const double cap = (target - x).norm() + std::sqrt(a.trace() * dt);
    const double len = score_drift.norm();
    if (len > cap) score_drift *= cap / len;

    Eigen::VectorXd next =
        x + sys.drift(t, x) * dt + score_drift + sys.diffusion(t, x) * noise_increment;
    if (!next.allFinite()) {
        throw NumericalBlowupError("bridge_step: non-finite state at t = " + std::to_string(t),
                                   t, std::numeric_limits<double>::infinity());
    }
    return next;
}

inline Trajectory simulate_bridge(const SdeSystem& sys, const ScoreProvider& score,
                                  const Eigen::VectorXd& target, const Eigen::VectorXd& x0,
                                  int n_steps, CounterRng& rng) {
    if (n_steps < 1) throw MalformedInputError("simulate_bridge: need at least one step");
    const double dt = sys.horizon / static_cast<double>(n_steps);
    const double noise_scale = std::sqrt(dt);

    Trajectory traj;
    traj.times.reserve(n_steps + 1);
    traj.states.reserve(n_steps + 1);
    traj.times.push_back(0.0);
    traj.states.push_back(x0);

    Eigen::VectorXd x = x0;
    Eigen::VectorXd dw(sys.noise_dim);
    for (int k = 0; k < n_steps; ++k) {
        const double t = dt * static_cast<double>(k);
        for (int i = 0; i < sys.noise_dim; ++i) dw[i] = noise_scale * rng.next_gaussian();
        x = bridge_step(sys, score, target, t, x, dt, dw);
        const double magnitude = x.cwiseAbs().maxCoeff();
        if (magnitude > kBlowupThreshold) {
            throw NumericalBlowupError(
                "simulate_bridge: state magnitude " + std::to_string(magnitude) +
                    " exceeded " + std::to_string(kBlowupThreshold) + " at t = " +
                    std::to_string(t + dt),
                t + dt, magnitude);
        }
        traj.times.push_back(dt * static_cast<double>(k + 1));
        traj.states.push_back(x);
    }
    return traj;
}

inline std::vector<Trajectory> simulate_bridge_ensemble(
    const SdeSystem& sys, const ScoreProvider& score, const Eigen::VectorXd& target,
    const Eigen::VectorXd& x0, int n_steps, int n_paths, const CounterRng& base_rng,
    int n_threads = 1) {
    std::vector<Trajectory> paths(n_paths);
    auto worker = [&](int begin, int end) {
        for (int p = begin; p < end; ++p) {
            CounterRng rng = base_rng.split(static_cast<std::uint64_t>(p));
            paths[p] = simulate_bridge(sys, score, target, x0, n_steps, rng);
        }
    };
    if (n_threads <= 1 || n_paths < 2) {
        worker(0, n_paths);
        return paths;
    }
    const int used = std::min(n_threads, n_paths);
    std::vector<std::thread> pool;
    pool.reserve(used);
    const int chunk = (n_paths + used - 1) / used;
    for (int w = 0; w < used; ++w) {
        const int begin = w * chunk;
        const int end = std::min(n_paths, begin + chunk);
        if (begin < end) pool.emplace_back(worker, begin, end);
    }
    for (auto& th : pool) th.join();
    return paths;
}

struct MartingaleRow {
    double time = 0.0;
    double estimate = 0.0;
    double standard_error = 0.0;
};

struct MartingaleReport {
    double h0 = 0.0;
    std::vector<MartingaleRow> rows;

    // Largest |estimate - h0| measured in combined standard errors.
    double max_deviation_in_se() const {
        double worst = 0.0;
        for (const auto& row : rows) {
            if (row.standard_error == 0.0) {
                if (row.estimate != h0) return std::numeric_limits<double>::infinity();
                continue;
            }
            worst = std::max(worst, std::abs(row.estimate - h0) / row.standard_error);
        }
        return worst;
    }
};

// Checks that E[h(t, X(t))] stays constant: simulates unconditioned paths and
// averages h_fn over the marginal at each requested time. h_fn must be the
// h-function itself (analytic where available, or a Monte Carlo wrapper).
inline MartingaleReport martingale_check(
    const SdeSystem& sys, const Eigen::VectorXd& x0, const std::vector<double>& times,
    int n_paths, int n_steps,
    const std::function<double(double, const Eigen::VectorXd&)>& h_fn,
    const CounterRng& base_rng) {
    if (n_paths < 1) throw MalformedInputError("martingale_check: need at least one path");
    for (double t : times) {
        if (t < 0.0 || t > sys.horizon) {
            throw HorizonError("martingale_check: time " + std::to_string(t) +
                               " outside [0, horizon]");
        }
    }
    MartingaleReport report;
    report.h0 = h_fn(0.0, x0);

    const double dt = sys.horizon / static_cast<double>(n_steps);
    std::vector<int> indices;
    indices.reserve(times.size());
    for (double t : times) {
        indices.push_back(
            std::clamp(static_cast<int>(std::lround(t / dt)), 0, n_steps));
    }

    std::vector<std::vector<double>> values(times.size(), std::vector<double>(n_paths));
    for (int p = 0; p < n_paths; ++p) {
        CounterRng rng = base_rng.split(static_cast<std::uint64_t>(p));
        Trajectory traj = simulate(sys, x0, n_steps, rng);
        for (std::size_t i = 0; i < indices.size(); ++i) {
            values[i][p] = h_fn(traj.times[indices[i]], traj.states[indices[i]]);
        }
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
        MartingaleRow row;
        row.time = dt * indices[i];
        row.estimate = mean_of(values[i]);
        row.standard_error = n_paths > 1 ? standard_error_of(values[i]) : 0.0;
        report.rows.push_back(row);
    }
    return report;
}

struct ProjectionReport {
    // Largest |full-score head - projected score| over the probe set.
    double max_score_deviation = 0.0;
    // Largest |score component| on coordinates the target does not constrain.
    double max_unconstrained_score = 0.0;
    // Per-kept-coefficient KS distance between bridge marginals of the full
    // and the projected simulations, with the shared critical value.
    std::vector<double> ks_statistics;
    double ks_critical = 0.0;

    bool passed(double score_tol = 1e-12) const {
        if (max_score_deviation > score_tol) return false;
        if (max_unconstrained_score != 0.0) return false;
        for (double d : ks_statistics) {
            if (d >= ks_critical) return false;
        }
        return true;
    }
};

// Conditioning an independent-coordinate Brownian system on its first kept_n
// coefficients must agree with conditioning the kept_n-dimensional projected
// system: identical scores on the kept block, zero score elsewhere, and
// matching bridge marginals.
inline ProjectionReport project_conditioning_check(int full_dim, int kept_n,
                                                   const Eigen::VectorXd& target_head,
                                                   const Eigen::VectorXd& diag_variances,
                                                   double horizon, int n_paths, int n_steps,
                                                   const CounterRng& base_rng) {
    if (kept_n < 1 || kept_n >= full_dim) {
        throw MalformedInputError("project_conditioning_check: kept_n out of range");
    }
    if (diag_variances.size() != full_dim || diag_variances.minCoeff() <= 0.0) {
        throw MalformedInputError(
            "project_conditioning_check: need a positive variance per coordinate");
    }
    if (target_head.size() != kept_n) {
        throw MalformedInputError("project_conditioning_check: target dimension mismatch");
    }

    const Eigen::MatrixXd c_full = diag_variances.asDiagonal();
    const Eigen::MatrixXd c_head = diag_variances.head(kept_n).asDiagonal();
    ScoreProvider full_score =
        cylindrical_score_provider(full_dim, kept_n, target_head, c_head, horizon);
    ScoreProvider head_score = bm_exact_score_provider(target_head, c_head, horizon);

    ProjectionReport report;

    // Deterministic probe states and times for the pointwise score identity.
    CounterRng probe_rng = base_rng.split(0);
    for (int probe = 0; probe < 32; ++probe) {
        const double t = horizon * (0.05 + 0.9 * probe / 31.0);
        Eigen::VectorXd x(full_dim);
        for (int i = 0; i < full_dim; ++i) x[i] = 2.0 * probe_rng.next_gaussian();
        const Eigen::VectorXd full = full_score.evaluate(t, x);
        const Eigen::VectorXd head = head_score.evaluate(t, x.head(kept_n));
        report.max_score_deviation = std::max(
            report.max_score_deviation, (full.head(kept_n) - head).cwiseAbs().maxCoeff());
        if (full_dim > kept_n) {
            report.max_unconstrained_score =
                std::max(report.max_unconstrained_score,
                         full.tail(full_dim - kept_n).cwiseAbs().maxCoeff());
        }
    }

    // Bridge marginals of the kept coefficients at mid-horizon, full vs
    // projected runs under independent streams.
    SdeSystem full_sys = brownian_system(full_dim, 1.0, horizon);
    full_sys.diffusion = [diag_variances, full_dim](double, const Eigen::VectorXd&) {
        return Eigen::MatrixXd(
            diag_variances.array().sqrt().matrix().asDiagonal());
    };
    full_sys.diffusion_squared = [c_full](double, const Eigen::VectorXd&) { return c_full; };
    SdeSystem head_sys = brownian_system(kept_n, 1.0, horizon);
    head_sys.diffusion = [diag_variances, kept_n](double, const Eigen::VectorXd&) {
        return Eigen::MatrixXd(
            diag_variances.head(kept_n).array().sqrt().matrix().asDiagonal());
    };
    head_sys.diffusion_squared = [c_head](double, const Eigen::VectorXd&) { return c_head; };

    Eigen::VectorXd zero_full = Eigen::VectorXd::Zero(full_dim);
    Eigen::VectorXd zero_head = Eigen::VectorXd::Zero(kept_n);
    Eigen::VectorXd full_target = Eigen::VectorXd::Zero(full_dim);
    full_target.head(kept_n) = target_head;

    auto full_paths = simulate_bridge_ensemble(full_sys, full_score, full_target, zero_full,
                                               n_steps, n_paths, base_rng.split(1));
    auto head_paths = simulate_bridge_ensemble(head_sys, head_score, target_head, zero_head,
                                               n_steps, n_paths, base_rng.split(2));

    const int mid = n_steps / 2;
    report.ks_critical = ks_critical_value(n_paths, n_paths, 0.01);
    for (int i = 0; i < kept_n; ++i) {
        std::vector<double> full_marginal(n_paths);
        std::vector<double> head_marginal(n_paths);
        for (int p = 0; p < n_paths; ++p) {
            full_marginal[p] = full_paths[p].states[mid][i];
            head_marginal[p] = head_paths[p].states[mid][i];
        }
        report.ks_statistics.push_back(ks_statistic(full_marginal, head_marginal));
    }
    return report;
}

}  // namespace shapebridge
