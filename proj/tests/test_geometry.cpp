#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "shapebridge/geometry.hpp"
#include "shapebridge/rng.hpp"
#include "shapebridge/text.hpp"

using namespace shapebridge;

namespace {

std::string temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "shapebridge_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

PlanarCurve unit_square() {
    PlanarCurve c;
    c.points = {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}};
    return c;
}

PlanarCurve circle(double radius, int n, Eigen::Vector2d center = {0.0, 0.0}) {
    PlanarCurve c;
    for (int i = 0; i < n; ++i) {
        double t = 2.0 * std::numbers::pi * i / n;
        c.points.emplace_back(center.x() + radius * std::cos(t),
                              center.y() + radius * std::sin(t));
    }
    return c;
}

}  // namespace

TEST_CASE("curve csv loading handles headers, rejects bad rows") {
    std::string path = temp_path("square.csv");
    text::write_file(path, "x,y\n0,0\n1,0\n1,1\n0,1\n");
    PlanarCurve c = load_curve(path);
    REQUIRE(c.size() == 4);
    REQUIRE(c.points[2] == Eigen::Vector2d(1.0, 1.0));

    text::write_file(path, "0,0\n1,0\n1,1\n");
    REQUIRE(load_curve(path).size() == 3);

    text::write_file(path, "0,0\n1,0\nbad,row\n");
    REQUIRE_THROWS_AS(load_curve(path), MalformedInputError);
    try {
        load_curve(path);
    } catch (const MalformedInputError& e) {
        REQUIRE(std::string(e.what()).find(":3") != std::string::npos);
    }

    text::write_file(path, "0,0\n1,0\n");
    REQUIRE_THROWS_AS(load_curve(path), DegenerateShapeError);

    REQUIRE_THROWS_AS(load_curve(temp_path("missing_file.csv")), MalformedInputError);
}

TEST_CASE("curve json loading follows the points schema") {
    std::string path = temp_path("tri.json");
    text::write_file(path, R"({"points": [[0, 0], [2, 0], [1, 1.5]]})");
    PlanarCurve c = load_curve(path);
    REQUIRE(c.size() == 3);
    REQUIRE(c.points[2] == Eigen::Vector2d(1.0, 1.5));

    text::write_file(path, R"({"points": [[0, 0], [2], [1, 1.5]]})");
    REQUIRE_THROWS_AS(load_curve(path), MalformedInputError);

    text::write_file(path, R"({"vertices": []})");
    REQUIRE_THROWS_AS(load_curve(path), MalformedInputError);
}

TEST_CASE("curve save and load round trip is bit exact") {
    CounterRng rng(11, 0);
    PlanarCurve c;
    for (int i = 0; i < 17; ++i) {
        c.points.emplace_back(rng.next_gaussian() * 1e3, rng.next_gaussian() * 1e-7);
    }
    std::string csv = temp_path("roundtrip.csv");
    save_curve_csv(c, csv);
    PlanarCurve back = load_curve(csv);
    REQUIRE(back.size() == c.size());
    for (int i = 0; i < c.size(); ++i) {
        REQUIRE(back.points[i].x() == c.points[i].x());
        REQUIRE(back.points[i].y() == c.points[i].y());
    }

    std::string json = temp_path("roundtrip.json");
    save_curve_json(c, json);
    back = load_curve(json);
    for (int i = 0; i < c.size(); ++i) {
        REQUIRE(back.points[i].x() == c.points[i].x());
        REQUIRE(back.points[i].y() == c.points[i].y());
    }
}

TEST_CASE("resampling the unit square to 8 points hits corners and midpoints") {
    PlanarCurve out = resample(unit_square(), 8);
    std::vector<Eigen::Vector2d> expected = {{0.0, 0.0}, {0.5, 0.0}, {1.0, 0.0}, {1.0, 0.5},
                                             {1.0, 1.0}, {0.5, 1.0}, {0.0, 1.0}, {0.0, 0.5}};
    REQUIRE(out.size() == 8);
    for (int i = 0; i < 8; ++i) {
        INFO("point " << i);
        REQUIRE((out.points[i] - expected[i]).norm() < 1e-14);
    }
}

TEST_CASE("resampling an already uniform polygon with equal count is the identity") {
    PlanarCurve c = circle(1.0, 32);
    PlanarCurve out = resample(c, 32);
    for (int i = 0; i < 32; ++i) {
        REQUIRE((out.points[i] - c.points[i]).norm() < 1e-12);
    }
}

TEST_CASE("resampled points are uniformly spaced in arc length") {
    PlanarCurve dense = circle(2.5, 4096);
    PlanarCurve out = resample(dense, 64);
    REQUIRE(out.size() == 64);
    std::vector<double> chords;
    for (int i = 0; i < 64; ++i) {
        chords.push_back((out.points[(i + 1) % 64] - out.points[i]).norm());
    }
    double lo = *std::min_element(chords.begin(), chords.end());
    double hi = *std::max_element(chords.begin(), chords.end());
    REQUIRE((hi - lo) / hi < 1e-6);
}

TEST_CASE("procrustes alignment of identical copies returns the normalized input") {
    ShapeDataset data;
    data.curves = {unit_square(), unit_square()};
    ProcrustesResult res = procrustes_align(data);

    PlanarCurve expected = detail::center_and_scale(unit_square(), "test");
    REQUIRE(std::abs(centroid_size(res.mean) - 1.0) < 1e-12);
    for (int i = 0; i < 4; ++i) {
        REQUIRE((res.mean.points[i] - expected.points[i]).norm() < 1e-12);
        REQUIRE((res.aligned.curves[0].points[i] - res.aligned.curves[1].points[i]).norm() <
                1e-12);
    }
    REQUIRE(res.objective.back() < 1e-20);
}

TEST_CASE("procrustes alignment undoes translation, scale and rotation") {
    PlanarCurve base = circle(1.0, 24);
    base.points[3] += Eigen::Vector2d(0.4, -0.2);  // break symmetry
    base.points[11] += Eigen::Vector2d(-0.1, 0.3);

    PlanarCurve moved = base;
    const double angle = 1.234;
    const double scale = 3.7;
    const Eigen::Vector2d shift(5.0, -2.0);
    for (auto& p : moved.points) {
        Eigen::Vector2d r(std::cos(angle) * p.x() - std::sin(angle) * p.y(),
                          std::sin(angle) * p.x() + std::cos(angle) * p.y());
        p = scale * r + shift;
    }

    ShapeDataset data;
    data.curves = {base, moved};
    ProcrustesResult res = procrustes_align(data);
    for (int i = 0; i < base.size(); ++i) {
        REQUIRE((res.aligned.curves[0].points[i] - res.aligned.curves[1].points[i]).norm() <
                1e-9);
    }
}

TEST_CASE("procrustes objective is non-increasing and order invariant") {
    CounterRng rng(5, 0);
    std::vector<PlanarCurve> curves;
    for (int k = 0; k < 5; ++k) {
        PlanarCurve c = circle(1.0, 20);
        for (auto& p : c.points) {
            p += 0.15 * Eigen::Vector2d(rng.next_gaussian(), rng.next_gaussian());
        }
        curves.push_back(c);
    }

    ShapeDataset forward;
    forward.curves = curves;
    ProcrustesResult res = procrustes_align(forward);
    for (std::size_t i = 1; i < res.objective.size(); ++i) {
        REQUIRE(res.objective[i] <= res.objective[i - 1] + 1e-12);
    }

    ShapeDataset reversed;
    reversed.curves.assign(curves.rbegin(), curves.rend());
    ProcrustesResult res2 = procrustes_align(reversed);
    for (int i = 0; i < res.mean.size(); ++i) {
        REQUIRE((res.mean.points[i] - res2.mean.points[i]).norm() < 1e-9);
    }
}

TEST_CASE("procrustes rejects degenerate input") {
    PlanarCurve repeated;
    repeated.points = {{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}};
    ShapeDataset data;
    data.curves = {unit_square(), repeated};
    REQUIRE_THROWS_AS(procrustes_align(data), DegenerateShapeError);

    ShapeDataset single;
    single.curves = {unit_square()};
    REQUIRE_THROWS_AS(procrustes_align(single), DegenerateShapeError);

    ShapeDataset mismatched;
    mismatched.curves = {unit_square(), circle(1.0, 10)};
    REQUIRE_THROWS_AS(procrustes_align(mismatched), DegenerateShapeError);
}

TEST_CASE("fourier analysis of a centered circle concentrates on the first basis") {
    FourierShape s = curve_to_fourier(circle(2.0, 64), 4);
    REQUIRE(std::abs(s.x[1] - std::complex<double>(1.0, 0.0)) < 1e-12);
    REQUIRE(std::abs(s.y[1] - std::complex<double>(0.0, -1.0)) < 1e-12);
    for (int n : {0, 2, 3}) {
        REQUIRE(std::abs(s.x[n]) < 1e-12);
        REQUIRE(std::abs(s.y[n]) < 1e-12);
    }
    REQUIRE(s.x[0].imag() == 0.0);
    REQUIRE(s.y[0].imag() == 0.0);
}

TEST_CASE("translation moves only the DC coefficient") {
    FourierShape centered = curve_to_fourier(circle(1.5, 48), 6);
    FourierShape shifted = curve_to_fourier(circle(1.5, 48, {3.0, -4.0}), 6);
    REQUIRE(std::abs(shifted.x[0] - centered.x[0] - 3.0) < 1e-12);
    REQUIRE(std::abs(shifted.y[0] - centered.y[0] + 4.0) < 1e-12);
    for (int n = 1; n < 6; ++n) {
        REQUIRE(std::abs(shifted.x[n] - centered.x[n]) < 1e-12);
        REQUIRE(std::abs(shifted.y[n] - centered.y[n]) < 1e-12);
    }
}

TEST_CASE("band limited curves round trip through analysis and synthesis") {
    // r(t) = 1 + 0.3 cos(3t) has coordinate frequencies up to 4.
    PlanarCurve flower;
    const int p_count = 64;
    for (int i = 0; i < p_count; ++i) {
        double t = 2.0 * std::numbers::pi * i / p_count;
        double r = 1.0 + 0.3 * std::cos(3.0 * t);
        flower.points.emplace_back(r * std::cos(t), r * std::sin(t));
    }
    FourierShape s = curve_to_fourier(flower, 6);
    PlanarCurve back = fourier_to_curve(s, p_count);
    for (int i = 0; i < p_count; ++i) {
        REQUIRE((back.points[i] - flower.points[i]).norm() < 1e-9);
    }
}

TEST_CASE("fourier feature flattening is 4 n_bases long and invertible") {
    FourierShape s = curve_to_fourier(circle(1.0, 32), 8);
    Eigen::VectorXd v = s.flatten();
    REQUIRE(v.size() == 32);
    FourierShape back = FourierShape::unflatten(v, 8);
    for (int n = 0; n < 8; ++n) {
        REQUIRE(std::abs(back.x[n] - s.x[n]) == 0.0);
        REQUIRE(std::abs(back.y[n] - s.y[n]) == 0.0);
    }
    REQUIRE_THROWS_AS(FourierShape::unflatten(v, 7), MalformedInputError);
}

TEST_CASE("analysis rejects more bases than points") {
    REQUIRE_THROWS_AS(curve_to_fourier(unit_square(), 5), InsufficientResolutionError);
}

TEST_CASE("fourier shape json round trips") {
    FourierShape s = curve_to_fourier(circle(1.2, 24, {0.5, 0.25}), 5);
    std::string path = temp_path("shape.json");
    save_fourier_json(s, path);
    FourierShape back = load_fourier_json(path);
    REQUIRE(back.n_bases == 5);
    for (int n = 0; n < 5; ++n) {
        REQUIRE(back.x[n] == s.x[n]);
        REQUIRE(back.y[n] == s.y[n]);
    }

    text::write_file(path, R"({"n_bases": 3, "x_re": [1, 2], "x_im": [0, 0, 0],)"
                           R"( "y_re": [0, 0, 0], "y_im": [0, 0, 0]})");
    REQUIRE_THROWS_AS(load_fourier_json(path), MalformedInputError);
}
