#pragma once

// Planar closed-curve handling: file formats, arc-length resampling,
// generalized Procrustes alignment, and the truncated Fourier representation
// used as the coefficient state of the shape-valued processes.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shapebridge/errors.hpp"
#include "shapebridge/text.hpp"

namespace shapebridge {

struct PlanarCurve {
    std::vector<Eigen::Vector2d> points;  // vertices of a closed polyline

    int size() const { return static_cast<int>(points.size()); }
};

struct ShapeDataset {
    std::vector<PlanarCurve> curves;
    std::vector<std::string> labels;  // optional, parallel to curves when set
};

inline void validate_curve(const PlanarCurve& curve, const std::string& context) {
    const int n = curve.size();
    if (n < 3) {
        throw DegenerateShapeError(context + ": a closed curve needs at least 3 points, got " +
                                   std::to_string(n));
    }
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector2d& p = curve.points[i];
        if (!p.allFinite()) {
            throw DegenerateShapeError(context + ": non-finite coordinate at point " +
                                       std::to_string(i));
        }
        const Eigen::Vector2d& q = curve.points[(i + 1) % n];
        if ((q - p).squaredNorm() == 0.0) {
            throw DegenerateShapeError(context + ": zero-length segment at point " +
                                       std::to_string(i));
        }
    }
}

inline Eigen::Vector2d centroid(const PlanarCurve& curve) {
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    for (const auto& p : curve.points) c += p;
    return c / static_cast<double>(curve.size());
}

// Root summed squared distance of the points from their centroid.
inline double centroid_size(const PlanarCurve& curve) {
    Eigen::Vector2d c = centroid(curve);
    double s = 0.0;
    for (const auto& p : curve.points) s += (p - c).squaredNorm();
    return std::sqrt(s);
}

enum class CurveFormat { Auto, Csv, Json };

namespace detail {

inline PlanarCurve parse_curve_csv(const std::string& path) {
    std::vector<std::string> lines = text::read_lines(path);
    PlanarCurve curve;
    bool first_data_line = true;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string_view line = text::trim(lines[i]);
        if (line.empty()) continue;
        auto fields = text::split_fields(line);
        double x = 0.0;
        double y = 0.0;
        bool ok = fields.size() == 2 && text::try_parse_double(fields[0], x) &&
                  text::try_parse_double(fields[1], y);
        if (!ok) {
            if (first_data_line) continue;  // header row
            throw MalformedInputError(path + ":" + std::to_string(i + 1) +
                                      ": expected two numeric fields, got \"" +
                                      std::string(line) + "\"");
        }
        first_data_line = false;
        curve.points.emplace_back(x, y);
    }
    return curve;
}

inline PlanarCurve parse_curve_json(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw MalformedInputError(path + ": invalid JSON: " + e.what());
    }
    if (!doc.is_object() || !doc.contains("points") || !doc["points"].is_array()) {
        throw MalformedInputError(path + ": expected an object with a \"points\" array");
    }
    PlanarCurve curve;
    for (std::size_t i = 0; i < doc["points"].size(); ++i) {
        const auto& entry = doc["points"][i];
        if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number() ||
            !entry[1].is_number()) {
            throw MalformedInputError(path + ": points[" + std::to_string(i) +
                                      "] is not a numeric [x, y] pair");
        }
        curve.points.emplace_back(entry[0].get<double>(), entry[1].get<double>());
    }
    return curve;
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace detail

inline PlanarCurve load_curve(const std::string& path, CurveFormat format = CurveFormat::Auto) {
    if (format == CurveFormat::Auto) {
        format = detail::ends_with(path, ".json") ? CurveFormat::Json : CurveFormat::Csv;
    }
    PlanarCurve curve = format == CurveFormat::Json ? detail::parse_curve_json(path)
                                                    : detail::parse_curve_csv(path);
    validate_curve(curve, path);
    return curve;
}

inline void save_curve_csv(const PlanarCurve& curve, const std::string& path) {
    std::string out = "x,y\n";
    for (const auto& p : curve.points) {
        out += text::format_double(p.x()) + "," + text::format_double(p.y()) + "\n";
    }
    text::write_file(path, out);
}

inline void save_curve_json(const PlanarCurve& curve, const std::string& path) {
    nlohmann::json doc;
    doc["points"] = nlohmann::json::array();
    for (const auto& p : curve.points) {
        doc["points"].push_back({p.x(), p.y()});
    }
    text::write_file(path, doc.dump(2) + "\n");
}

// Evenly spaced points along the closed polyline, starting at the original
// first vertex and walking in the original orientation.
inline PlanarCurve resample(const PlanarCurve& curve, int target_points) {
    validate_curve(curve, "resample input");
    if (target_points < 3) {
        throw DegenerateShapeError("resample: target point count must be at least 3, got " +
                                   std::to_string(target_points));
    }
    const int n = curve.size();
    std::vector<double> cumulative(static_cast<std::size_t>(n) + 1, 0.0);
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector2d& a = curve.points[i];
        const Eigen::Vector2d& b = curve.points[(i + 1) % n];
        cumulative[i + 1] = cumulative[i] + (b - a).norm();
    }
    const double total = cumulative[n];

    PlanarCurve out;
    out.points.reserve(target_points);
    int seg = 0;
    for (int j = 0; j < target_points; ++j) {
        const double s = total * static_cast<double>(j) / static_cast<double>(target_points);
        while (seg + 1 < n && cumulative[seg + 1] <= s) ++seg;
        const double seg_len = cumulative[seg + 1] - cumulative[seg];
        const double t = (s - cumulative[seg]) / seg_len;
        const Eigen::Vector2d& a = curve.points[seg];
        const Eigen::Vector2d& b = curve.points[(seg + 1) % n];
        out.points.push_back(a + t * (b - a));
    }
    return out;
}

struct ProcrustesResult {
    ShapeDataset aligned;               // centered, unit centroid size, rotated
    PlanarCurve mean;                   // consensus shape, unit centroid size
    std::vector<double> objective;      // summed squared distance to the mean, per iteration
    int iterations = 0;
};

namespace detail {

inline PlanarCurve center_and_scale(const PlanarCurve& curve, const std::string& context) {
    Eigen::Vector2d c = centroid(curve);
    double size = centroid_size(curve);
    if (!(size > 1e-300)) {
        throw DegenerateShapeError(context + ": centroid size is zero");
    }
    PlanarCurve out;
    out.points.reserve(curve.size());
    for (const auto& p : curve.points) out.points.push_back((p - c) / size);
    return out;
}

// Angle maximizing the inner product of the rotated curve with the target.
inline double optimal_rotation_angle(const PlanarCurve& curve, const PlanarCurve& target) {
    double dot = 0.0;
    double cross = 0.0;
    for (int i = 0; i < curve.size(); ++i) {
        const Eigen::Vector2d& a = curve.points[i];
        const Eigen::Vector2d& b = target.points[i];
        dot += a.dot(b);
        cross += a.x() * b.y() - a.y() * b.x();
    }
    return std::atan2(cross, dot);
}

inline void rotate_in_place(PlanarCurve& curve, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (auto& p : curve.points) {
        p = Eigen::Vector2d(c * p.x() - s * p.y(), s * p.x() + c * p.y());
    }
}

inline PlanarCurve dataset_mean(const std::vector<PlanarCurve>& curves) {
    PlanarCurve mean;
    mean.points.assign(curves.front().points.size(), Eigen::Vector2d::Zero());
    for (const auto& c : curves) {
        for (std::size_t i = 0; i < mean.points.size(); ++i) mean.points[i] += c.points[i];
    }
    for (auto& p : mean.points) p /= static_cast<double>(curves.size());
    return mean;
}

inline double sum_squared_to(const std::vector<PlanarCurve>& curves, const PlanarCurve& mean) {
    double s = 0.0;
    for (const auto& c : curves) {
        for (std::size_t i = 0; i < mean.points.size(); ++i) {
            s += (c.points[i] - mean.points[i]).squaredNorm();
        }
    }
    return s;
}

}  // namespace detail

// Generalized Procrustes alignment over translation, scale and rotation.
// Curves must share a point count and point correspondence. Each iteration
// rotates every curve to the running mean and refreshes the mean; the summed
// squared distance to the mean is non-increasing across iterations.
inline ProcrustesResult procrustes_align(const ShapeDataset& dataset, int max_iterations = 200,
                                         double tolerance = 1e-10) {
    const std::size_t n = dataset.curves.size();
    if (n < 2) {
        throw DegenerateShapeError("procrustes_align: need at least 2 curves, got " +
                                   std::to_string(n));
    }
    const int points = dataset.curves.front().size();
    for (std::size_t i = 0; i < n; ++i) {
        std::string context = "procrustes_align: curve " + std::to_string(i);
        validate_curve(dataset.curves[i], context);
        if (dataset.curves[i].size() != points) {
            throw DegenerateShapeError(context + ": point count " +
                                       std::to_string(dataset.curves[i].size()) +
                                       " differs from first curve's " + std::to_string(points));
        }
    }

    ProcrustesResult result;
    result.aligned.labels = dataset.labels;
    std::vector<PlanarCurve>& aligned = result.aligned.curves;
    aligned.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        aligned.push_back(detail::center_and_scale(dataset.curves[i],
                                                   "procrustes_align: curve " + std::to_string(i)));
    }

    PlanarCurve mean = detail::dataset_mean(aligned);
    for (int iter = 0; iter < max_iterations; ++iter) {
        for (auto& curve : aligned) {
            detail::rotate_in_place(curve, detail::optimal_rotation_angle(curve, mean));
        }
        PlanarCurve next_mean = detail::dataset_mean(aligned);
        result.objective.push_back(detail::sum_squared_to(aligned, next_mean));
        result.iterations = iter + 1;

        double displacement = 0.0;
        for (std::size_t i = 0; i < mean.points.size(); ++i) {
            displacement += (next_mean.points[i] - mean.points[i]).squaredNorm();
        }
        mean = std::move(next_mean);
        if (std::sqrt(displacement) < tolerance) break;
    }

    result.mean = detail::center_and_scale(mean, "procrustes_align: consensus mean");
    return result;
}

// Truncated Fourier coefficients of a closed curve, one complex spectrum per
// coordinate. Index n holds (1/P) sum_p c_p exp(-i n theta_p) with
// theta_p = 2 pi p / P, for n = 0 .. n_bases-1.
struct FourierShape {
    int n_bases = 0;
    Eigen::VectorXcd x;
    Eigen::VectorXcd y;

    // Real feature layout: [Re x | Im x | Re y | Im y], length 4 * n_bases.
    Eigen::VectorXd flatten() const {
        Eigen::VectorXd v(4 * n_bases);
        v.segment(0, n_bases) = x.real();
        v.segment(n_bases, n_bases) = x.imag();
        v.segment(2 * n_bases, n_bases) = y.real();
        v.segment(3 * n_bases, n_bases) = y.imag();
        return v;
    }

    static FourierShape unflatten(const Eigen::VectorXd& v, int n_bases) {
        if (v.size() != 4 * n_bases) {
            throw MalformedInputError("FourierShape::unflatten: vector length " +
                                      std::to_string(v.size()) + " does not match 4 * " +
                                      std::to_string(n_bases));
        }
        FourierShape s;
        s.n_bases = n_bases;
        s.x = Eigen::VectorXcd(n_bases);
        s.y = Eigen::VectorXcd(n_bases);
        for (int n = 0; n < n_bases; ++n) {
            s.x[n] = std::complex<double>(v[n], v[n_bases + n]);
            s.y[n] = std::complex<double>(v[2 * n_bases + n], v[3 * n_bases + n]);
        }
        return s;
    }
};

inline FourierShape curve_to_fourier(const PlanarCurve& curve, int n_bases) {
    validate_curve(curve, "curve_to_fourier input");
    const int p_count = curve.size();
    if (n_bases < 1) {
        throw InsufficientResolutionError("curve_to_fourier: n_bases must be positive");
    }
    if (n_bases > p_count) {
        throw InsufficientResolutionError("curve_to_fourier: " + std::to_string(n_bases) +
                                          " bases exceed the " + std::to_string(p_count) +
                                          " available points");
    }
    FourierShape shape;
    shape.n_bases = n_bases;
    shape.x = Eigen::VectorXcd::Zero(n_bases);
    shape.y = Eigen::VectorXcd::Zero(n_bases);
    const double step = 2.0 * std::numbers::pi / static_cast<double>(p_count);
    for (int n = 0; n < n_bases; ++n) {
        std::complex<double> ax(0.0, 0.0);
        std::complex<double> ay(0.0, 0.0);
        for (int p = 0; p < p_count; ++p) {
            const std::complex<double> w = std::polar(1.0, -step * n * p);
            ax += curve.points[p].x() * w;
            ay += curve.points[p].y() * w;
        }
        shape.x[n] = ax / static_cast<double>(p_count);
        shape.y[n] = ay / static_cast<double>(p_count);
    }
    return shape;
}

// Synthesis at out_points uniform parameters: real part of the one-sided
// expansion, c(theta) = Re c_0 + 2 sum_{n>=1} Re(c_n exp(i n theta)).
inline PlanarCurve fourier_to_curve(const FourierShape& shape, int out_points) {
    if (shape.n_bases < 1 || shape.x.size() != shape.n_bases || shape.y.size() != shape.n_bases) {
        throw MalformedInputError("fourier_to_curve: inconsistent FourierShape");
    }
    if (out_points < 3) {
        throw InsufficientResolutionError("fourier_to_curve: need at least 3 output points");
    }
    PlanarCurve curve;
    curve.points.reserve(out_points);
    const double step = 2.0 * std::numbers::pi / static_cast<double>(out_points);
    for (int j = 0; j < out_points; ++j) {
        double cx = shape.x[0].real();
        double cy = shape.y[0].real();
        for (int n = 1; n < shape.n_bases; ++n) {
            const std::complex<double> w = std::polar(1.0, step * n * j);
            cx += 2.0 * (shape.x[n] * w).real();
            cy += 2.0 * (shape.y[n] * w).real();
        }
        curve.points.emplace_back(cx, cy);
    }
    return curve;
}

inline FourierShape load_fourier_json(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw MalformedInputError(path + ": invalid JSON: " + e.what());
    }
    const char* keys[] = {"x_re", "x_im", "y_re", "y_im"};
    if (!doc.is_object() || !doc.contains("n_bases") || !doc["n_bases"].is_number_integer()) {
        throw MalformedInputError(path + ": expected an object with integer \"n_bases\"");
    }
    const int n = doc["n_bases"].get<int>();
    if (n < 1) {
        throw MalformedInputError(path + ": n_bases must be positive");
    }
    for (const char* key : keys) {
        if (!doc.contains(key) || !doc[key].is_array() ||
            static_cast<int>(doc[key].size()) != n) {
            throw MalformedInputError(path + ": \"" + key + "\" must be an array of length " +
                                      std::to_string(n));
        }
    }
    FourierShape shape;
    shape.n_bases = n;
    shape.x = Eigen::VectorXcd(n);
    shape.y = Eigen::VectorXcd(n);
    for (int i = 0; i < n; ++i) {
        shape.x[i] = std::complex<double>(doc["x_re"][i].get<double>(),
                                          doc["x_im"][i].get<double>());
        shape.y[i] = std::complex<double>(doc["y_re"][i].get<double>(),
                                          doc["y_im"][i].get<double>());
    }
    return shape;
}

inline void save_fourier_json(const FourierShape& shape, const std::string& path) {
    nlohmann::json doc;
    doc["n_bases"] = shape.n_bases;
    auto fill = [](const Eigen::VectorXcd& v, bool real_part) {
        nlohmann::json arr = nlohmann::json::array();
        for (int i = 0; i < v.size(); ++i) {
            arr.push_back(real_part ? v[i].real() : v[i].imag());
        }
        return arr;
    };
    doc["x_re"] = fill(shape.x, true);
    doc["x_im"] = fill(shape.x, false);
    doc["y_re"] = fill(shape.y, true);
    doc["y_im"] = fill(shape.y, false);
    text::write_file(path, doc.dump(2) + "\n");
}

}  // namespace shapebridge
