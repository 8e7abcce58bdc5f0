#pragma once

// Run configuration files, shape-state loading, and plot-ready CSV/JSON
// output: the data plumbing shared by the command-line front end. All numeric
// text goes through locale-independent shortest round-trip formatting, so a
// repeated run with the same seed produces byte-identical files.

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "shapebridge/bridge.hpp"
#include "shapebridge/errors.hpp"
#include "shapebridge/geometry.hpp"
#include "shapebridge/kernel_flow.hpp"
#include "shapebridge/sde.hpp"
#include "shapebridge/text.hpp"
#include "shapebridge/trainer.hpp"

namespace shapebridge {

struct EvalProtocol {
    int n_points = 100;
    int n_times = 10;
    int n_steps = 100;
    int synthesis_points = 100;
};

struct BridgeSpec {
    std::string mode = "exact";  // "exact" | "inexact"
    double obs_variance = 0.0;
    std::string target_shape;  // path to a shape file; may be overridden per run
};

// Full description of a run: which system, its discretization, and the
// command-specific sections. Parsed strictly — unknown keys are rejected so a
// typo cannot silently fall back to a default.
struct RunConfig {
    std::string system = "bm";  // "bm" | "kernel_flow"
    double horizon = 1.0;
    int n_bases = 8;
    double sigma = 1.0;  // diffusion scale of the plain Brownian system
    KernelFlowConfig kernel;
    int steps = 100;
    int n_paths = 20;
    // Shape snapshots are taken at these fractions of the horizon.
    std::vector<double> output_times = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    TrainConfig train;
    EvalProtocol eval;
    BridgeSpec bridge;
    std::string resume_from;
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const {
        if (system != "bm" && system != "kernel_flow") {
            throw MalformedInputError("RunConfig: system must be \"bm\" or \"kernel_flow\"");
        }
        if (!(horizon > 0.0)) throw MalformedInputError("RunConfig: horizon must be positive");
        if (n_bases < 1) throw MalformedInputError("RunConfig: n_bases must be >= 1");
        if (sigma < 0.0) throw MalformedInputError("RunConfig: sigma must be >= 0");
        if (steps < 1) throw MalformedInputError("RunConfig: steps must be >= 1");
        if (n_paths < 1) throw MalformedInputError("RunConfig: n_paths must be >= 1");
        if (threads < 1) throw MalformedInputError("RunConfig: threads must be >= 1");
        if (output_times.empty()) {
            throw MalformedInputError("RunConfig: output_times must not be empty");
        }
        for (double f : output_times) {
            if (!(f >= 0.0 && f <= 1.0)) {
                throw MalformedInputError(
                    "RunConfig: output_times are fractions of the horizon in [0, 1]");
            }
        }
        if (bridge.mode != "exact" && bridge.mode != "inexact") {
            throw MalformedInputError("RunConfig: bridge.mode must be \"exact\" or \"inexact\"");
        }
        if (bridge.obs_variance < 0.0) {
            throw MalformedInputError("RunConfig: bridge.obs_variance must be >= 0");
        }
    }
};

namespace detail {

inline void require_known_keys(const nlohmann::json& obj, const char* section,
                               std::initializer_list<const char*> known) {
    for (const auto& item : obj.items()) {
        bool found = false;
        for (const char* key : known) {
            if (item.key() == key) {
                found = true;
                break;
            }
        }
        if (!found) {
            throw MalformedInputError(std::string("RunConfig: unknown key \"") + item.key() +
                                      "\" in " + section);
        }
    }
}

template <typename T>
void read_field(const nlohmann::json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw MalformedInputError(std::string("RunConfig: bad value for \"") + key +
                                  "\": " + e.what());
    }
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& doc) {
    if (!doc.is_object()) throw MalformedInputError("RunConfig: document is not an object");
    detail::require_known_keys(doc, "the top level",
                               {"system", "horizon", "n_bases", "sigma", "kernel", "steps",
                                "n_paths", "output_times", "train", "eval", "bridge",
                                "resume_from", "seed", "threads"});
    RunConfig config;
    detail::read_field(doc, "system", config.system);
    detail::read_field(doc, "horizon", config.horizon);
    detail::read_field(doc, "n_bases", config.n_bases);
    detail::read_field(doc, "sigma", config.sigma);
    detail::read_field(doc, "steps", config.steps);
    detail::read_field(doc, "n_paths", config.n_paths);
    detail::read_field(doc, "output_times", config.output_times);
    detail::read_field(doc, "resume_from", config.resume_from);
    detail::read_field(doc, "seed", config.seed);
    detail::read_field(doc, "threads", config.threads);

    if (doc.contains("kernel")) {
        const auto& k = doc.at("kernel");
        detail::require_known_keys(k, "\"kernel\"",
                                   {"variance", "amplitude", "domain_half_width", "grid_side",
                                    "n_noise_bases", "curve_nodes"});
        detail::read_field(k, "variance", config.kernel.kernel_variance);
        detail::read_field(k, "amplitude", config.kernel.kernel_amplitude);
        detail::read_field(k, "domain_half_width", config.kernel.domain_half_width);
        detail::read_field(k, "grid_side", config.kernel.grid_side);
        detail::read_field(k, "n_noise_bases", config.kernel.n_noise_bases);
        detail::read_field(k, "curve_nodes", config.kernel.curve_nodes);
    }
    if (doc.contains("train")) {
        const auto& t = doc.at("train");
        detail::require_known_keys(
            t, "\"train\"",
            {"epochs", "batches_per_epoch", "trajectories_per_batch", "steps_per_trajectory",
             "peak_lr", "warmup_steps", "floor_lr", "adam_beta1", "adam_beta2",
             "adam_epsilon"});
        detail::read_field(t, "epochs", config.train.epochs);
        detail::read_field(t, "batches_per_epoch", config.train.batches_per_epoch);
        detail::read_field(t, "trajectories_per_batch", config.train.trajectories_per_batch);
        detail::read_field(t, "steps_per_trajectory", config.train.steps_per_trajectory);
        detail::read_field(t, "peak_lr", config.train.peak_lr);
        detail::read_field(t, "warmup_steps", config.train.warmup_steps);
        detail::read_field(t, "floor_lr", config.train.floor_lr);
        detail::read_field(t, "adam_beta1", config.train.adam_beta1);
        detail::read_field(t, "adam_beta2", config.train.adam_beta2);
        detail::read_field(t, "adam_epsilon", config.train.adam_epsilon);
    }
    if (doc.contains("eval")) {
        const auto& e = doc.at("eval");
        detail::require_known_keys(e, "\"eval\"",
                                   {"n_points", "n_times", "n_steps", "synthesis_points"});
        detail::read_field(e, "n_points", config.eval.n_points);
        detail::read_field(e, "n_times", config.eval.n_times);
        detail::read_field(e, "n_steps", config.eval.n_steps);
        detail::read_field(e, "synthesis_points", config.eval.synthesis_points);
    }
    if (doc.contains("bridge")) {
        const auto& b = doc.at("bridge");
        detail::require_known_keys(b, "\"bridge\"", {"mode", "obs_variance", "target_shape"});
        detail::read_field(b, "mode", config.bridge.mode);
        detail::read_field(b, "obs_variance", config.bridge.obs_variance);
        detail::read_field(b, "target_shape", config.bridge.target_shape);
    }
    config.kernel.n_state_bases = config.n_bases;
    config.validate();
    return config;
}

inline RunConfig load_run_config(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw MalformedInputError(path + ": invalid JSON: " + e.what());
    }
    return parse_run_config(doc);
}

inline nlohmann::json run_config_to_json(const RunConfig& config) {
    nlohmann::json doc;
    doc["system"] = config.system;
    doc["horizon"] = config.horizon;
    doc["n_bases"] = config.n_bases;
    doc["sigma"] = config.sigma;
    doc["kernel"] = {{"variance", config.kernel.kernel_variance},
                     {"amplitude", config.kernel.kernel_amplitude},
                     {"domain_half_width", config.kernel.domain_half_width},
                     {"grid_side", config.kernel.grid_side},
                     {"n_noise_bases", config.kernel.n_noise_bases},
                     {"curve_nodes", config.kernel.curve_nodes}};
    doc["steps"] = config.steps;
    doc["n_paths"] = config.n_paths;
    doc["output_times"] = config.output_times;
    doc["train"] = {{"epochs", config.train.epochs},
                    {"batches_per_epoch", config.train.batches_per_epoch},
                    {"trajectories_per_batch", config.train.trajectories_per_batch},
                    {"steps_per_trajectory", config.train.steps_per_trajectory},
                    {"peak_lr", config.train.peak_lr},
                    {"warmup_steps", config.train.warmup_steps},
                    {"floor_lr", config.train.floor_lr},
                    {"adam_beta1", config.train.adam_beta1},
                    {"adam_beta2", config.train.adam_beta2},
                    {"adam_epsilon", config.train.adam_epsilon}};
    doc["eval"] = {{"n_points", config.eval.n_points},
                   {"n_times", config.eval.n_times},
                   {"n_steps", config.eval.n_steps},
                   {"synthesis_points", config.eval.synthesis_points}};
    doc["bridge"] = {{"mode", config.bridge.mode},
                     {"obs_variance", config.bridge.obs_variance},
                     {"target_shape", config.bridge.target_shape}};
    if (!config.resume_from.empty()) doc["resume_from"] = config.resume_from;
    doc["seed"] = config.seed;
    doc["threads"] = config.threads;
    return doc;
}

// A shape file becomes a flattened coefficient state: JSON files carry
// coefficients directly (basis count must match), CSV files carry curves
// that are resampled and analyzed.
inline Eigen::VectorXd load_shape_state(const std::string& path, int n_bases) {
    if (detail::ends_with(path, ".json")) {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(text::read_file(path));
        } catch (const nlohmann::json::exception& e) {
            throw MalformedInputError(path + ": invalid JSON: " + e.what());
        }
        if (doc.is_object() && doc.contains("n_bases")) {
            const FourierShape shape = load_fourier_json(path);
            if (shape.n_bases != n_bases) {
                throw MalformedInputError(path + ": holds " + std::to_string(shape.n_bases) +
                                          " coefficients, run expects " +
                                          std::to_string(n_bases));
            }
            return shape.flatten();
        }
        const PlanarCurve curve = load_curve(path, CurveFormat::Json);
        return curve_to_fourier(resample(curve, std::max(4 * n_bases, 3)), n_bases).flatten();
    }
    const PlanarCurve curve = load_curve(path);
    const int nodes = std::max(4 * n_bases, 3);
    return curve_to_fourier(resample(curve, nodes), n_bases).flatten();
}

inline SdeSystem make_system(const RunConfig& config) {
    config.validate();
    if (config.system == "bm") {
        return brownian_system(4 * config.n_bases, config.sigma, config.horizon);
    }
    KernelFlowConfig kernel = config.kernel;
    kernel.n_state_bases = config.n_bases;
    return kernel_flow_system(kernel, config.horizon);
}

// Snapshot fractions to integration-grid indices (nearest step).
inline std::vector<int> snapshot_indices(const std::vector<double>& fractions, int n_steps) {
    std::vector<int> indices;
    indices.reserve(fractions.size());
    for (double f : fractions) {
        indices.push_back(std::clamp(
            static_cast<int>(std::lround(f * static_cast<double>(n_steps))), 0, n_steps));
    }
    return indices;
}

inline std::string trajectory_csv_header(int state_dim) {
    std::string header = "time";
    for (int i = 0; i < state_dim; ++i) header += ",c" + std::to_string(i);
    return header + "\n";
}

inline void append_state_row(std::string& out, double time, const Eigen::VectorXd& state) {
    out += text::format_double(time);
    for (int i = 0; i < state.size(); ++i) {
        out += ',';
        out += text::format_double(state[i]);
    }
    out += '\n';
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
    if (traj.times.empty()) throw MalformedInputError("write_trajectory_csv: empty trajectory");
    std::string out = trajectory_csv_header(static_cast<int>(traj.states.front().size()));
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        append_state_row(out, traj.times[k], traj.states[k]);
    }
    text::write_file(path, out);
}

// All paths in one file, keyed by a leading path column.
inline void write_paths_csv(const std::string& path, const std::vector<Trajectory>& paths) {
    if (paths.empty()) throw MalformedInputError("write_paths_csv: no trajectories");
    std::string out =
        "path," + trajectory_csv_header(static_cast<int>(paths.front().states.front().size()));
    for (std::size_t p = 0; p < paths.size(); ++p) {
        for (std::size_t k = 0; k < paths[p].times.size(); ++k) {
            out += std::to_string(p);
            out += ',';
            out += text::format_double(paths[p].times[k]);
            for (int i = 0; i < paths[p].states[k].size(); ++i) {
                out += ',';
                out += text::format_double(paths[p].states[k][i]);
            }
            out += '\n';
        }
    }
    text::write_file(path, out);
}

// Synthesized curves at snapshot times: one row per curve point.
inline void write_curve_snapshots_csv(
    const std::string& path, const std::vector<std::pair<double, PlanarCurve>>& snapshots) {
    std::string out = "time,point,x,y\n";
    for (const auto& [time, curve] : snapshots) {
        for (int p = 0; p < curve.size(); ++p) {
            out += text::format_double(time);
            out += ',' + std::to_string(p);
            out += ',' + text::format_double(curve.points[p].x());
            out += ',' + text::format_double(curve.points[p].y());
            out += '\n';
        }
    }
    text::write_file(path, out);
}

inline void write_json_file(const std::string& path, const nlohmann::json& doc) {
    text::write_file(path, doc.dump(2) + "\n");
}

}  // namespace shapebridge
