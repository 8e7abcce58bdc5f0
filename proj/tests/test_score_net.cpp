#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "shapebridge/errors.hpp"
#include "shapebridge/rng.hpp"
#include "shapebridge/score_net.hpp"

using namespace shapebridge;

namespace {

NetworkPlan tiny_plan() {
    NetworkPlan plan;
    plan.io_dim = 6;
    plan.time_embed_dim = 4;
    plan.down_dims = {8, 4};
    plan.up_dims = {4, 8};
    return plan;
}

// Parameters with every tensor populated so nothing is hidden behind zeros.
NetworkParams scrambled_params(const NetworkPlan& plan, std::uint64_t seed) {
    CounterRng rng(seed, 0);
    NetworkParams params = init_params(plan, rng);
    const NetworkLayout layout = make_layout(plan);
    for (const auto& spec : layout.tensors) {
        auto view = tensor_view(params, spec);
        for (int r = 0; r < spec.rows; ++r) {
            for (int c = 0; c < spec.cols; ++c) {
                if (spec.name.find("running_var") != std::string::npos) {
                    view(r, c) = 0.5 + 0.5 * rng.next_uniform();
                } else {
                    view(r, c) = 0.3 * rng.next_gaussian();
                }
            }
        }
    }
    return params;
}

double batch_loss(NetworkParams params, const NetworkPlan& plan, const Eigen::VectorXd& times,
                  const Eigen::MatrixXd& x, const Eigen::MatrixXd& reference) {
    const Eigen::MatrixXd y = forward_batch(params, plan, times, x, ForwardMode::Train);
    return 0.5 * (y - reference).squaredNorm();
}

}  // namespace

TEST_CASE("sinusoidal embedding matches its definition") {
    const Eigen::VectorXd at_zero = sinusoidal_embed(0.0, 8);
    for (int i = 0; i < 4; ++i) {
        REQUIRE(at_zero[2 * i] == 0.0);
        REQUIRE(at_zero[2 * i + 1] == 1.0);
    }

    const double t = 0.37;
    const Eigen::VectorXd e = sinusoidal_embed(t, 8);
    for (int i = 0; i < 4; ++i) {
        const double rate = std::pow(10000.0, 2.0 * i / 8.0);
        REQUIRE(e[2 * i] == std::sin(t / rate));
        REQUIRE(e[2 * i + 1] == std::cos(t / rate));
    }
    REQUIRE(sinusoidal_embed(t, 8) == e);
    REQUIRE_THROWS_AS(sinusoidal_embed(0.5, 7), MalformedInputError);
}

TEST_CASE("sinusoidal embedding separates a fine time grid") {
    const int dim = 32;
    std::vector<Eigen::VectorXd> embeds;
    embeds.reserve(1000);
    for (int i = 0; i < 1000; ++i) {
        embeds.push_back(sinusoidal_embed(i / 999.0, dim));
    }
    for (std::size_t a = 0; a < embeds.size(); ++a) {
        for (std::size_t b = a + 1; b < embeds.size(); ++b) {
            if ((embeds[a] - embeds[b]).cwiseAbs().maxCoeff() == 0.0) {
                FAIL("embeddings collide at grid points " << a << " and " << b);
            }
        }
    }
    SUCCEED();
}

TEST_CASE("plan validation enforces the mirrored width family") {
    NetworkPlan plan = fourier_plan(8);
    REQUIRE(plan.io_dim == 32);
    REQUIRE(plan.time_embed_dim == 32);
    REQUIRE(plan.down_dims == std::vector<int>{64, 32, 16, 8});
    REQUIRE(plan.up_dims == std::vector<int>{8, 16, 32, 64});
    REQUIRE_NOTHROW(plan.validate());
    REQUIRE(fourier_plan(16).io_dim == 64);
    REQUIRE(fourier_plan(32).io_dim == 128);

    NetworkPlan bad = plan;
    bad.up_dims = {16, 8, 32, 64};
    REQUIRE_THROWS_AS(bad.validate(), MalformedInputError);
    bad = plan;
    bad.time_embed_dim = 31;
    REQUIRE_THROWS_AS(bad.validate(), MalformedInputError);
    bad = plan;
    bad.activation = "relu";
    REQUIRE_THROWS_AS(bad.validate(), MalformedInputError);

    NetworkPlan marks = landmark_plan(16);
    REQUIRE(marks.io_dim == 32);
    REQUIRE_NOTHROW(marks.validate());
}

TEST_CASE("freshly initialized network outputs the zero score") {
    const NetworkPlan plan = fourier_plan(8);
    CounterRng rng(500, 0);
    NetworkParams params = init_params(plan, rng);

    CounterRng probe(501, 0);
    for (int trial = 0; trial < 4; ++trial) {
        Eigen::VectorXd x(plan.io_dim);
        for (int i = 0; i < x.size(); ++i) x[i] = probe.next_gaussian();
        const Eigen::VectorXd y = forward_eval(params, plan, 0.25 * trial, x);
        REQUIRE(y.size() == plan.io_dim);
        REQUIRE(y.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("initialization is deterministic in the seed") {
    const NetworkPlan plan = tiny_plan();
    CounterRng a(502, 0);
    CounterRng b(502, 0);
    REQUIRE(init_params(plan, a).values == init_params(plan, b).values);
    CounterRng c(503, 0);
    REQUIRE(init_params(plan, a).values != init_params(plan, c).values);
}

TEST_CASE("hidden pre-activations keep unit-scale variance at width 256") {
    NetworkPlan plan;
    plan.io_dim = 256;
    plan.time_embed_dim = 32;
    plan.down_dims = {256};
    plan.up_dims = {256};
    CounterRng rng(504, 0);
    NetworkParams params = init_params(plan, rng);

    const int n_samples = 1000;
    Eigen::MatrixXd x(plan.io_dim, n_samples);
    CounterRng data(505, 0);
    for (int c = 0; c < n_samples; ++c) {
        for (int r = 0; r < plan.io_dim; ++r) x(r, c) = data.next_gaussian();
    }
    ForwardCache cache;
    forward_batch(params, plan, Eigen::VectorXd::Constant(n_samples, 0.5), x,
                  ForwardMode::Train, &cache);
    const Eigen::MatrixXd& z1 = cache.blocks[0].z1;
    const double mean = z1.mean();
    const double var = (z1.array() - mean).square().mean();
    REQUIRE(var > 0.5);
    REQUIRE(var < 2.0);
}

TEST_CASE("eval-mode batches match independent single passes") {
    const NetworkPlan plan = tiny_plan();
    NetworkParams params = scrambled_params(plan, 506);

    const int n = 7;
    Eigen::MatrixXd x(plan.io_dim, n);
    Eigen::VectorXd times(n);
    CounterRng data(507, 0);
    for (int c = 0; c < n; ++c) {
        times[c] = data.next_uniform();
        for (int r = 0; r < plan.io_dim; ++r) x(r, c) = data.next_gaussian();
    }
    const Eigen::MatrixXd batch = forward_batch(params, plan, times, x, ForwardMode::Eval);
    REQUIRE(batch.rows() == plan.io_dim);
    REQUIRE(batch.cols() == n);
    for (int c = 0; c < n; ++c) {
        const Eigen::VectorXd single = forward_eval(params, plan, times[c], x.col(c));
        REQUIRE((batch.col(c) - single).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("eval mode leaves parameters untouched and train mode refreshes statistics") {
    const NetworkPlan plan = tiny_plan();
    NetworkParams params = scrambled_params(plan, 508);
    const Eigen::VectorXd before = params.values;

    Eigen::MatrixXd x = Eigen::MatrixXd::Random(plan.io_dim, 5);
    Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(5, 0.1, 0.9);
    forward_batch(params, plan, times, x, ForwardMode::Eval);
    REQUIRE(params.values == before);

    ForwardCache cache;
    forward_batch(params, plan, times, x, ForwardMode::Train, &cache);
    const NetworkLayout layout = make_layout(plan);
    const TensorSpec& rm = layout.find("enc0.running_mean");
    const TensorSpec& rv = layout.find("enc0.running_var");
    for (int i = 0; i < rm.rows; ++i) {
        const double expected_mean =
            0.9 * before[rm.offset + i] + 0.1 * cache.blocks[0].mean[i];
        const double expected_var =
            0.9 * before[rv.offset + i] + 0.1 * cache.blocks[0].var[i];
        REQUIRE(params.values[rm.offset + i] == Catch::Approx(expected_mean).margin(1e-14));
        REQUIRE(params.values[rv.offset + i] == Catch::Approx(expected_var).margin(1e-14));
    }
}

TEST_CASE("analytic gradients match central finite differences on every layer type") {
    const NetworkPlan plan = tiny_plan();
    NetworkParams params = scrambled_params(plan, 509);
    const NetworkLayout layout = make_layout(plan);

    const int n = 5;
    Eigen::MatrixXd x(plan.io_dim, n);
    Eigen::VectorXd times(n);
    Eigen::MatrixXd reference(plan.io_dim, n);
    CounterRng data(510, 0);
    for (int c = 0; c < n; ++c) {
        times[c] = data.next_uniform();
        for (int r = 0; r < plan.io_dim; ++r) {
            x(r, c) = data.next_gaussian();
            reference(r, c) = data.next_gaussian();
        }
    }

    NetworkParams work = params;
    ForwardCache cache;
    const Eigen::MatrixXd y =
        forward_batch(work, plan, times, x, ForwardMode::Train, &cache);
    const Eigen::VectorXd grad = backward_batch(params, plan, cache, y - reference);

    // Stratify the probes: a handful of entries from every tensor kind so
    // dense, normalization, skip, and time-projection paths are all covered.
    std::vector<long> probe_indices;
    CounterRng pick(511, 0);
    for (const auto& spec : layout.tensors) {
        if (!spec.trainable) continue;
        const int n_probes = spec.size() >= 3 ? 3 : static_cast<int>(spec.size());
        for (int k = 0; k < n_probes; ++k) {
            probe_indices.push_back(
                spec.offset + static_cast<long>(pick.next_uniform() * spec.size()));
        }
    }
    REQUIRE(probe_indices.size() >= 50);

    const double h = 1e-4;
    for (long idx : probe_indices) {
        NetworkParams up = params;
        NetworkParams down = params;
        up.values[idx] += h;
        down.values[idx] -= h;
        const double fd = (batch_loss(up, plan, times, x, reference) -
                           batch_loss(down, plan, times, x, reference)) /
                          (2.0 * h);
        const double scale = std::max({1.0, std::abs(fd), std::abs(grad[idx])});
        REQUIRE(std::abs(grad[idx] - fd) / scale < 1e-4);
    }
}

TEST_CASE("backward is linear and zero on a zero upstream gradient") {
    const NetworkPlan plan = tiny_plan();
    NetworkParams params = scrambled_params(plan, 512);

    const int n = 4;
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(plan.io_dim, n);
    Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(n, 0.0, 1.0);
    NetworkParams work = params;
    ForwardCache cache;
    forward_batch(work, plan, times, x, ForwardMode::Train, &cache);

    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(plan.io_dim, n);
    REQUIRE(backward_batch(params, plan, cache, zero).cwiseAbs().maxCoeff() == 0.0);

    const Eigen::MatrixXd g1 = Eigen::MatrixXd::Random(plan.io_dim, n);
    const Eigen::MatrixXd g2 = Eigen::MatrixXd::Random(plan.io_dim, n);
    const Eigen::VectorXd sum_of = backward_batch(params, plan, cache, g1 + g2);
    const Eigen::VectorXd separate = backward_batch(params, plan, cache, g1) +
                                     backward_batch(params, plan, cache, g2);
    REQUIRE((sum_of - separate).cwiseAbs().maxCoeff() <
            1e-12 * std::max(1.0, separate.cwiseAbs().maxCoeff()));
}

TEST_CASE("backward refuses an eval-mode cache") {
    const NetworkPlan plan = tiny_plan();
    NetworkParams params = scrambled_params(plan, 513);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(plan.io_dim, 3);
    Eigen::VectorXd times = Eigen::VectorXd::Constant(3, 0.5);
    ForwardCache cache;
    forward_batch(params, plan, times, x, ForwardMode::Eval, &cache);
    REQUIRE_THROWS_AS(
        backward_batch(params, plan, cache, Eigen::MatrixXd::Zero(plan.io_dim, 3)),
        MalformedInputError);
}

TEST_CASE("non-finite activations raise a numerical error naming the layer") {
    const NetworkPlan plan = tiny_plan();
    NetworkParams params = scrambled_params(plan, 514);
    Eigen::MatrixXd x =
        Eigen::MatrixXd::Constant(plan.io_dim, 2, std::numeric_limits<double>::max());
    Eigen::VectorXd times = Eigen::VectorXd::Constant(2, 0.5);
    REQUIRE_THROWS_WITH(forward_batch(params, plan, times, x, ForwardMode::Train),
                        Catch::Matchers::ContainsSubstring("encoder block 0"));
}

TEST_CASE("forward validates dimensions and parameter buffers") {
    const NetworkPlan plan = tiny_plan();
    NetworkParams params = scrambled_params(plan, 515);

    Eigen::MatrixXd wrong_rows = Eigen::MatrixXd::Zero(plan.io_dim + 1, 2);
    REQUIRE_THROWS_AS(forward_batch(params, plan, Eigen::VectorXd::Constant(2, 0.1),
                                    wrong_rows, ForwardMode::Eval),
                      MalformedInputError);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(plan.io_dim, 2);
    REQUIRE_THROWS_AS(
        forward_batch(params, plan, Eigen::VectorXd::Constant(3, 0.1), x, ForwardMode::Eval),
        MalformedInputError);

    NetworkParams short_params = params;
    short_params.values.conservativeResize(params.values.size() - 1);
    REQUIRE_THROWS_AS(forward_batch(short_params, plan, Eigen::VectorXd::Constant(2, 0.1), x,
                                    ForwardMode::Eval),
                      IncompatibleModelError);
}

TEST_CASE("checkpoints round trip bitwise and reject corruption") {
    const NetworkPlan plan = fourier_plan(8);
    NetworkParams params = scrambled_params(plan, 516);
    params.step_count = 1234;

    const auto dir = std::filesystem::temp_directory_path();
    const std::string path = (dir / "score_net_roundtrip.ckpt").string();
    save_checkpoint(path, plan, params);
    auto [loaded_plan, loaded] = load_checkpoint(path);
    REQUIRE(loaded_plan.io_dim == plan.io_dim);
    REQUIRE(loaded_plan.time_embed_dim == plan.time_embed_dim);
    REQUIRE(loaded_plan.down_dims == plan.down_dims);
    REQUIRE(loaded_plan.up_dims == plan.up_dims);
    REQUIRE(loaded.step_count == 1234);
    REQUIRE(loaded.values == params.values);

    const std::string bad_magic = (dir / "score_net_bad_magic.ckpt").string();
    {
        std::ofstream out(bad_magic, std::ios::binary);
        out << "definitely not a checkpoint at all";
    }
    REQUIRE_THROWS_AS(load_checkpoint(bad_magic), IncompatibleModelError);

    const std::string truncated = (dir / "score_net_truncated.ckpt").string();
    {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
        std::ofstream out(truncated, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    REQUIRE_THROWS_AS(load_checkpoint(truncated), MalformedInputError);
    REQUIRE_THROWS_AS(load_checkpoint((dir / "score_net_missing.ckpt").string()),
                      MalformedInputError);
}
