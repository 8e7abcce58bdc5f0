#pragma once

// SDE systems on flattened shape states, Euler-Maruyama integration, and the
// Brownian baseline systems. A system is dX = b(t, X) dt + B(t, X) dW with
// an m-dimensional driving Wiener process; diffusion_squared is B B^T and may
// be overridden when a closed form is available.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "shapebridge/errors.hpp"
#include "shapebridge/rng.hpp"

namespace shapebridge {

struct SdeSystem {
    int state_dim = 0;
    int noise_dim = 0;
    double horizon = 1.0;
    // True when diffusion does not depend on (t, x); lets consumers hoist
    // per-step matrix evaluations out of loops.
    bool constant_diffusion = false;

    std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> drift;
    std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&)> diffusion;
    std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&)> diffusion_squared;

    Eigen::MatrixXd diffusion_sq(double t, const Eigen::VectorXd& x) const {
        if (diffusion_squared) return diffusion_squared(t, x);
        Eigen::MatrixXd b = diffusion(t, x);
        return b * b.transpose();
    }
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> states;

    int steps() const { return static_cast<int>(times.size()) - 1; }
};

// Magnitude at which a simulated state is declared divergent.
inline constexpr double kBlowupThreshold = 1e8;

inline Eigen::VectorXd euler_maruyama_step(const SdeSystem& sys, double t,
                                           const Eigen::VectorXd& x, double dt,
                                           const Eigen::VectorXd& noise_increment) {
    if (x.size() != sys.state_dim) {
        throw MalformedInputError("euler_maruyama_step: state has dimension " +
                                  std::to_string(x.size()) + ", system expects " +
                                  std::to_string(sys.state_dim));
    }
    if (noise_increment.size() != sys.noise_dim) {
        throw MalformedInputError("euler_maruyama_step: noise increment has dimension " +
                                  std::to_string(noise_increment.size()) + ", system expects " +
                                  std::to_string(sys.noise_dim));
    }
    Eigen::VectorXd next =
        x + sys.drift(t, x) * dt + sys.diffusion(t, x) * noise_increment;
    if (!next.allFinite()) {
        throw NumericalBlowupError(
            "euler_maruyama_step: non-finite state at t = " + std::to_string(t), t,
            std::numeric_limits<double>::infinity());
    }
    return next;
}

inline Trajectory simulate(const SdeSystem& sys, const Eigen::VectorXd& x0, int n_steps,
                           CounterRng& rng) {
    if (n_steps < 1) {
        throw MalformedInputError("simulate: need at least one step");
    }
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
        x = euler_maruyama_step(sys, t, x, dt, dw);
        const double magnitude = x.cwiseAbs().maxCoeff();
        if (magnitude > kBlowupThreshold) {
            throw NumericalBlowupError("simulate: state magnitude " + std::to_string(magnitude) +
                                           " exceeded " + std::to_string(kBlowupThreshold) +
                                           " at t = " + std::to_string(t + dt),
                                       t + dt, magnitude);
        }
        traj.times.push_back(dt * static_cast<double>(k + 1));
        traj.states.push_back(x);
    }
    return traj;
}

// Independent paths, one derived RNG stream per path index so results do not
// depend on the number of threads.
inline std::vector<Trajectory> simulate_ensemble(const SdeSystem& sys, const Eigen::VectorXd& x0,
                                                 int n_steps, int n_paths,
                                                 const CounterRng& base_rng, int n_threads = 1) {
    std::vector<Trajectory> paths(n_paths);
    auto worker = [&](int begin, int end) {
        for (int p = begin; p < end; ++p) {
            CounterRng rng = base_rng.split(static_cast<std::uint64_t>(p));
            paths[p] = simulate(sys, x0, n_steps, rng);
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
    for (int t = 0; t < used; ++t) {
        const int begin = t * chunk;
        const int end = std::min(n_paths, begin + chunk);
        if (begin < end) pool.emplace_back(worker, begin, end);
    }
    for (auto& th : pool) th.join();
    return paths;
}

inline SdeSystem brownian_system(int dim, double sigma, double horizon) {
    if (dim < 1 || sigma < 0.0 || horizon <= 0.0) {
        throw MalformedInputError("brownian_system: need dim >= 1, sigma >= 0, horizon > 0");
    }
    SdeSystem sys;
    sys.state_dim = dim;
    sys.noise_dim = dim;
    sys.horizon = horizon;
    sys.constant_diffusion = true;
    sys.drift = [dim](double, const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(dim); };
    sys.diffusion = [dim, sigma](double, const Eigen::VectorXd&) {
        return Eigen::MatrixXd(sigma * Eigen::MatrixXd::Identity(dim, dim));
    };
    sys.diffusion_squared = [dim, sigma](double, const Eigen::VectorXd&) {
        return Eigen::MatrixXd(sigma * sigma * Eigen::MatrixXd::Identity(dim, dim));
    };
    return sys;
}

enum class ShapeRepresentation { FourierBases, Landmarks };

// Independent Brownian motion on every flattened shape component: 4 * count
// coordinates for count Fourier bases, 2 * count for count landmarks.
inline SdeSystem brownian_shape_system(ShapeRepresentation representation, int count,
                                       double sigma, double horizon) {
    const int dim = representation == ShapeRepresentation::FourierBases ? 4 * count : 2 * count;
    return brownian_system(dim, sigma, horizon);
}

}  // namespace shapebridge
