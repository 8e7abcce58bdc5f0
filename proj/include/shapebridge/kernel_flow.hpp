#pragma once

// Kernel-smoothed stochastic flows of closed curves. The driving noise is a
// truncated complex exponential field on a square domain D = [-L, L]^2,
// smoothed through a Gaussian kernel centred on the current curve points. The
// flow is integrated either on truncated Fourier coefficients of the curve or
// directly on landmark points.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "shapebridge/errors.hpp"
#include "shapebridge/fft.hpp"
#include "shapebridge/geometry.hpp"
#include "shapebridge/rng.hpp"
#include "shapebridge/sde.hpp"

namespace shapebridge {

struct KernelFlowConfig {
    double kernel_variance = 0.2;    // width^2 of the smoothing kernel
    double kernel_amplitude = 1.0;   // multiplicative kernel strength
    double domain_half_width = 2.0;  // L; noise lives on [-L, L]^2
    int grid_side = 32;              // G; noise quadrature nodes per axis
    int n_state_bases = 8;           // N; retained curve coefficients
    int n_noise_bases = 4;           // M; noise frequencies run over [-M, M]^2
    int curve_nodes = 0;             // quadrature nodes along the curve; 0 = 4N

    int nodes() const { return curve_nodes > 0 ? curve_nodes : 4 * n_state_bases; }
    int mode_side() const { return 2 * n_noise_bases + 1; }
    int n_modes() const { return mode_side() * mode_side(); }

    void validate() const {
        if (kernel_variance <= 0.0) {
            throw MalformedInputError("KernelFlowConfig: kernel_variance must be positive");
        }
        if (kernel_amplitude < 0.0) {
            throw MalformedInputError("KernelFlowConfig: kernel_amplitude must be nonnegative");
        }
        if (domain_half_width <= 0.0) {
            throw MalformedInputError("KernelFlowConfig: domain_half_width must be positive");
        }
        if (grid_side < 1 || n_state_bases < 1 || n_noise_bases < 0) {
            throw MalformedInputError("KernelFlowConfig: grid_side, n_state_bases must be >= 1 "
                                      "and n_noise_bases >= 0");
        }
        if (grid_side < 2 * n_noise_bases) {
            throw AliasingError("KernelFlowConfig: grid_side " + std::to_string(grid_side) +
                                " cannot resolve noise frequencies up to " +
                                std::to_string(n_noise_bases) + "; need grid_side >= 2 * " +
                                std::to_string(n_noise_bases));
        }
    }
};

// Fixed enumeration of the noise modes (l, m) in [-M, M]^2 and of the
// independent real degrees of freedom under Hermitian pairing
// w(-l, -m) = conj(w(l, m)): the self-conjugate mode (0, 0) carries one real
// degree of freedom, every canonical pair carries two.
struct ModeTable {
    int M = 0;
    std::vector<std::pair<int, int>> canonical;  // l > 0, or l == 0 and m > 0

    int side() const { return 2 * M + 1; }
    int n_modes() const { return side() * side(); }
    int n_dofs() const { return n_modes(); }  // 1 + 2 * canonical.size()

    int index(int l, int m) const { return (l + M) * side() + (m + M); }
};

inline ModeTable make_mode_table(int M) {
    ModeTable table;
    table.M = M;
    for (int m = 1; m <= M; ++m) table.canonical.emplace_back(0, m);
    for (int l = 1; l <= M; ++l) {
        for (int m = -M; m <= M; ++m) table.canonical.emplace_back(l, m);
    }
    return table;
}

// One draw per independent real degree of freedom, each N(0, dt). Order:
// the (0, 0) mode first, then (a, b) pairs following ModeTable::canonical.
inline Eigen::VectorXd sample_q_wiener_dofs(const ModeTable& table, double dt, CounterRng& rng) {
    if (dt < 0.0) {
        throw MalformedInputError("sample_q_wiener_dofs: dt must be nonnegative");
    }
    const double scale = std::sqrt(dt);
    Eigen::VectorXd dofs(table.n_dofs());
    for (int i = 0; i < dofs.size(); ++i) dofs[i] = scale * rng.next_gaussian();
    return dofs;
}

inline Eigen::VectorXcd dofs_to_modes(const ModeTable& table, const Eigen::VectorXd& dofs) {
    if (dofs.size() != table.n_dofs()) {
        throw MalformedInputError("dofs_to_modes: degree-of-freedom vector has wrong length");
    }
    Eigen::VectorXcd modes(table.n_modes());
    modes[table.index(0, 0)] = std::complex<double>(dofs[0], 0.0);
    for (std::size_t k = 0; k < table.canonical.size(); ++k) {
        const auto [l, m] = table.canonical[k];
        const std::complex<double> w(dofs[1 + 2 * k], dofs[2 + 2 * k]);
        modes[table.index(l, m)] = w;
        modes[table.index(-l, -m)] = std::conj(w);
    }
    return modes;
}

// Complex noise increments over one time step, indexed by ModeTable::index.
inline Eigen::VectorXcd sample_q_wiener_increment(int n_noise_bases, double dt,
                                                  CounterRng& rng) {
    ModeTable table = make_mode_table(n_noise_bases);
    return dofs_to_modes(table, sample_q_wiener_dofs(table, dt, rng));
}

// Field synthesis sum_{l,m} w_{l,m} exp(i (l y1 + m y2)) at the given points;
// real-valued (up to rounding) when the modes are Hermitian-paired.
inline Eigen::VectorXcd synthesize_noise_field(const ModeTable& table,
                                               const Eigen::VectorXcd& modes,
                                               const std::vector<Eigen::Vector2d>& points) {
    Eigen::VectorXcd field = Eigen::VectorXcd::Zero(points.size());
    for (std::size_t p = 0; p < points.size(); ++p) {
        std::complex<double> acc(0.0, 0.0);
        for (int l = -table.M; l <= table.M; ++l) {
            for (int m = -table.M; m <= table.M; ++m) {
                acc += modes[table.index(l, m)] *
                       std::polar(1.0, l * points[p].x() + m * points[p].y());
            }
        }
        field[p] = acc;
    }
    return field;
}

// Noise-grid node positions along one axis: cell centres of [-L, L] split
// into grid_side cells.
inline std::vector<double> noise_grid_axis(const KernelFlowConfig& config) {
    std::vector<double> axis(config.grid_side);
    const double h = 2.0 * config.domain_half_width / static_cast<double>(config.grid_side);
    for (int j = 0; j < config.grid_side; ++j) {
        axis[j] = -config.domain_half_width + (j + 0.5) * h;
    }
    return axis;
}

namespace detail {

// Inner quadrature over the noise grid, exploiting that the Gaussian kernel
// and the exponential basis both factor over the two axes:
//   S_p(l, m) = amplitude * cell_area * A_p(l) * B_p(m),
//   A_p(l) = sum_j exp(-(u_x - g_j)^2 / (2 var)) exp(i l g_j).
// Returns an (n_points x n_modes) matrix indexed by ModeTable::index.
inline Eigen::MatrixXcd kernel_noise_inner_sums(const std::vector<Eigen::Vector2d>& points,
                                                const KernelFlowConfig& config,
                                                const ModeTable& table) {
    const int n_points = static_cast<int>(points.size());
    const int side = table.side();
    const int G = config.grid_side;
    const std::vector<double> axis = noise_grid_axis(config);
    const double h = 2.0 * config.domain_half_width / static_cast<double>(G);
    const double cell_area = h * h;
    const double inv_two_var = 1.0 / (2.0 * config.kernel_variance);

    // exp(i f g_j) for every frequency f in [-M, M] and grid node j
    Eigen::MatrixXcd waves(side, G);
    for (int f = -table.M; f <= table.M; ++f) {
        for (int j = 0; j < G; ++j) {
            waves(f + table.M, j) = std::polar(1.0, f * axis[j]);
        }
    }

    Eigen::MatrixXcd inner(n_points, table.n_modes());
    Eigen::VectorXd kx(G), ky(G);
    Eigen::VectorXcd ax(side), ay(side);
    for (int p = 0; p < n_points; ++p) {
        for (int j = 0; j < G; ++j) {
            const double dx = points[p].x() - axis[j];
            const double dy = points[p].y() - axis[j];
            kx[j] = std::exp(-dx * dx * inv_two_var);
            ky[j] = std::exp(-dy * dy * inv_two_var);
        }
        ax = waves * kx;
        ay = waves * ky;
        const double scale = config.kernel_amplitude * cell_area;
        for (int l = -table.M; l <= table.M; ++l) {
            for (int m = -table.M; m <= table.M; ++m) {
                inner(p, table.index(l, m)) = scale * ax[l + table.M] * ay[m + table.M];
            }
        }
    }
    return inner;
}

enum class CurveConvention {
    Centered,  // nodes x_p = -pi + 2 pi p / P, analysis kernel exp(+i n x)
    Standard,  // nodes theta_p = 2 pi p / P, analysis kernel exp(-i n theta)
};

// Projection of the kernel-smoothed noise basis onto the curve coefficient
// basis: an (n_state_bases x n_modes) complex matrix mapping mode increments
// to coefficient increments.
inline Eigen::MatrixXcd kernel_flow_coefficient_matrix(
    const std::vector<Eigen::Vector2d>& state_curve, const KernelFlowConfig& config,
    CurveConvention convention) {
    config.validate();
    const int n_points = static_cast<int>(state_curve.size());
    const int n_bases = config.n_state_bases;
    if (n_points < n_bases) {
        throw InsufficientResolutionError(
            "kernel_flow_coefficients: " + std::to_string(n_points) +
            " curve nodes cannot carry " + std::to_string(n_bases) + " bases");
    }
    const ModeTable table = make_mode_table(config.n_noise_bases);
    const Eigen::MatrixXcd inner = kernel_noise_inner_sums(state_curve, config, table);

    Eigen::MatrixXcd coeff(n_bases, table.n_modes());
    std::vector<std::complex<double>> column(n_points);
    const int sign = convention == CurveConvention::Centered ? +1 : -1;
    for (int mode = 0; mode < table.n_modes(); ++mode) {
        for (int p = 0; p < n_points; ++p) column[p] = inner(p, mode);
        const std::vector<std::complex<double>> spectrum = fft::transform(column, sign);
        for (int n = 0; n < n_bases; ++n) {
            std::complex<double> v = spectrum[n] / static_cast<double>(n_points);
            if (convention == CurveConvention::Centered && (n % 2) == 1) v = -v;
            coeff(n, mode) = v;
        }
    }
    return coeff;
}

}  // namespace detail

// Quadrature coefficients <e_n, Q(X) g_{l,m}> of the kernel-smoothed noise
// basis against the curve bases e_n(x) = exp(i n x), for a curve sampled at
// uniform parameter nodes on [-pi, pi). Row n, column ModeTable::index(l, m).
// Equals (1 / 2 pi) sum_x exp(i n x) sum_y k(X(x), y) exp(i (l y1 + m y2))
// dy dx over the cell-centred noise grid.
inline Eigen::MatrixXcd kernel_flow_coefficients(const std::vector<Eigen::Vector2d>& state_curve,
                                                 const KernelFlowConfig& config) {
    return detail::kernel_flow_coefficient_matrix(state_curve, config,
                                                  detail::CurveConvention::Centered);
}

namespace detail {

// Real block of the diffusion matrix for one coordinate channel: maps the
// real noise degrees of freedom to (Re, Im) increments of the retained
// coefficients under Hermitian pairing.
inline void fill_realified_block(const Eigen::MatrixXcd& coeff, const ModeTable& table,
                                 Eigen::Ref<Eigen::MatrixXd> re_rows,
                                 Eigen::Ref<Eigen::MatrixXd> im_rows) {
    const int n_bases = static_cast<int>(coeff.rows());
    for (int n = 0; n < n_bases; ++n) {
        const std::complex<double> c0 = coeff(n, table.index(0, 0));
        re_rows(n, 0) = c0.real();
        im_rows(n, 0) = c0.imag();
        for (std::size_t k = 0; k < table.canonical.size(); ++k) {
            const auto [l, m] = table.canonical[k];
            const std::complex<double> cp = coeff(n, table.index(l, m));
            const std::complex<double> cm = coeff(n, table.index(-l, -m));
            const std::complex<double> sum = cp + cm;
            const std::complex<double> diff = cp - cm;
            re_rows(n, 1 + 2 * k) = sum.real();
            im_rows(n, 1 + 2 * k) = sum.imag();
            re_rows(n, 2 + 2 * k) = -diff.imag();
            im_rows(n, 2 + 2 * k) = diff.real();
        }
    }
}

}  // namespace detail

// Kernel flow on truncated Fourier coefficients. State is the flattened
// FourierShape (4N real components); the driving noise has one real degree
// of freedom per mode and coordinate (2 (2M+1)^2 in total). The two
// coordinates share the kernel but are driven by independent fields.
inline SdeSystem kernel_flow_system(const KernelFlowConfig& config, double horizon = 1.0) {
    config.validate();
    const int n_bases = config.n_state_bases;
    const int n_points = config.nodes();
    if (n_points < 2 * n_bases) {
        throw InsufficientResolutionError("kernel_flow_system: need at least 2 * n_state_bases "
                                          "curve nodes, got " + std::to_string(n_points));
    }
    const ModeTable table = make_mode_table(config.n_noise_bases);
    const int n_dofs = table.n_dofs();

    SdeSystem sys;
    sys.state_dim = 4 * n_bases;
    sys.noise_dim = 2 * n_dofs;
    sys.horizon = horizon;
    sys.drift = [dim = sys.state_dim](double, const Eigen::VectorXd&) {
        return Eigen::VectorXd::Zero(dim);
    };
    sys.diffusion = [config, table, n_bases, n_points, n_dofs](double, const Eigen::VectorXd& x) {
        const FourierShape shape = FourierShape::unflatten(x, n_bases);
        const PlanarCurve curve = fourier_to_curve(shape, n_points);
        const Eigen::MatrixXcd coeff = detail::kernel_flow_coefficient_matrix(
            curve.points, config, detail::CurveConvention::Standard);

        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(4 * n_bases, 2 * n_dofs);
        // x coordinate: rows [0, N) re and [N, 2N) im, left dof block
        detail::fill_realified_block(coeff, table, b.block(0, 0, n_bases, n_dofs),
                                     b.block(n_bases, 0, n_bases, n_dofs));
        // y coordinate: rows [2N, 3N) re and [3N, 4N) im, right dof block
        detail::fill_realified_block(coeff, table,
                                     b.block(2 * n_bases, n_dofs, n_bases, n_dofs),
                                     b.block(3 * n_bases, n_dofs, n_bases, n_dofs));
        return b;
    };
    return sys;
}

// Landmark states are flattened as [x_0 .. x_{P-1}, y_0 .. y_{P-1}].
inline Eigen::VectorXd landmarks_to_state(const std::vector<Eigen::Vector2d>& points) {
    const int n = static_cast<int>(points.size());
    Eigen::VectorXd state(2 * n);
    for (int i = 0; i < n; ++i) {
        state[i] = points[i].x();
        state[n + i] = points[i].y();
    }
    return state;
}

inline std::vector<Eigen::Vector2d> state_to_landmarks(const Eigen::VectorXd& state) {
    if (state.size() % 2 != 0) {
        throw MalformedInputError("state_to_landmarks: state length must be even");
    }
    const int n = static_cast<int>(state.size()) / 2;
    std::vector<Eigen::Vector2d> points(n);
    for (int i = 0; i < n; ++i) points[i] = Eigen::Vector2d(state[i], state[n + i]);
    return points;
}

// Kernel flow directly on landmark points: each landmark moves with the
// noise field smoothed by the kernel row k(x_i, y) over the grid nodes y,
// with one independent 2-D Wiener increment per node (the grid Dirac masses
// carry the cell area as quadrature weight).
inline SdeSystem landmark_flow_system(int n_landmarks, const KernelFlowConfig& config,
                                      double horizon = 1.0) {
    config.validate();
    if (n_landmarks < 1) {
        throw MalformedInputError("landmark_flow_system: need at least one landmark");
    }
    const int G = config.grid_side;
    const int n_nodes = G * G;

    SdeSystem sys;
    sys.state_dim = 2 * n_landmarks;
    sys.noise_dim = 2 * n_nodes;
    sys.horizon = horizon;
    sys.drift = [dim = sys.state_dim](double, const Eigen::VectorXd&) {
        return Eigen::VectorXd::Zero(dim);
    };
    sys.diffusion = [config, n_landmarks, G, n_nodes](double, const Eigen::VectorXd& x) {
        const std::vector<double> axis = noise_grid_axis(config);
        const double h = 2.0 * config.domain_half_width / static_cast<double>(G);
        const double cell_area = h * h;
        const double inv_two_var = 1.0 / (2.0 * config.kernel_variance);

        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2 * n_landmarks, 2 * n_nodes);
        for (int i = 0; i < n_landmarks; ++i) {
            const double px = x[i];
            const double py = x[n_landmarks + i];
            for (int j1 = 0; j1 < G; ++j1) {
                const double dx = px - axis[j1];
                const double kx = std::exp(-dx * dx * inv_two_var);
                for (int j2 = 0; j2 < G; ++j2) {
                    const double dy = py - axis[j2];
                    const double k =
                        config.kernel_amplitude * kx * std::exp(-dy * dy * inv_two_var);
                    const int node = j1 * G + j2;
                    const double w = k * cell_area;
                    b(i, node) = w;
                    b(n_landmarks + i, n_nodes + node) = w;
                }
            }
        }
        return b;
    };
    return sys;
}

}  // namespace shapebridge
