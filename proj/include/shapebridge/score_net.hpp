#pragma once

// Dense score-approximation network: sinusoidal time embedding, a U-net style
// stack of fully connected blocks with SiLU activations and batch
// normalization, additive skip connections between mirrored widths, and exact
// reverse-mode gradients. All arithmetic is 64-bit; batches store one sample
// per column.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "shapebridge/errors.hpp"
#include "shapebridge/rng.hpp"

namespace shapebridge {

struct NetworkPlan {
    int io_dim = 0;
    int time_embed_dim = 0;
    std::vector<int> down_dims;
    std::vector<int> up_dims;
    std::string activation = "silu";

    void validate() const {
        if (io_dim < 1) throw MalformedInputError("NetworkPlan: io_dim must be positive");
        if (time_embed_dim < 2 || time_embed_dim % 2 != 0) {
            throw MalformedInputError("NetworkPlan: time_embed_dim must be even and >= 2");
        }
        if (down_dims.empty()) throw MalformedInputError("NetworkPlan: down_dims is empty");
        for (int w : down_dims) {
            if (w < 1) throw MalformedInputError("NetworkPlan: widths must be positive");
        }
        if (up_dims.size() != down_dims.size()) {
            throw MalformedInputError("NetworkPlan: up_dims must mirror down_dims");
        }
        for (std::size_t i = 0; i < up_dims.size(); ++i) {
            if (up_dims[i] != down_dims[down_dims.size() - 1 - i]) {
                throw MalformedInputError("NetworkPlan: up_dims must be down_dims reversed");
            }
        }
        if (activation != "silu") {
            throw MalformedInputError("NetworkPlan: unsupported activation " + activation);
        }
    }
};

// Width family io -> [8N, 4N, 2N, N] with io = 4N, mirrored on the way up.
inline NetworkPlan fourier_plan(int n_bases) {
    if (n_bases < 1) throw MalformedInputError("fourier_plan: n_bases must be positive");
    NetworkPlan plan;
    plan.io_dim = 4 * n_bases;
    plan.time_embed_dim = 4 * n_bases;
    plan.down_dims = {8 * n_bases, 4 * n_bases, 2 * n_bases, n_bases};
    plan.up_dims = {n_bases, 2 * n_bases, 4 * n_bases, 8 * n_bases};
    return plan;
}

inline NetworkPlan landmark_plan(int n_points) {
    if (n_points < 2) throw MalformedInputError("landmark_plan: need at least two points");
    NetworkPlan plan;
    plan.io_dim = 2 * n_points;
    plan.time_embed_dim = plan.io_dim + plan.io_dim % 2;
    const int base = std::max(1, plan.io_dim / 4);
    plan.down_dims = {8 * base, 4 * base, 2 * base, base};
    plan.up_dims = {base, 2 * base, 4 * base, 8 * base};
    return plan;
}

// One named parameter tensor inside the flat buffer. Matrices are stored
// row-major at values[offset .. offset + rows*cols).
struct TensorSpec {
    std::string name;
    int rows = 0;
    int cols = 0;
    long offset = 0;
    bool trainable = true;

    long size() const { return static_cast<long>(rows) * cols; }
};

struct NetworkLayout {
    std::vector<TensorSpec> tensors;
    long total = 0;

    const TensorSpec& find(const std::string& name) const {
        for (const auto& t : tensors) {
            if (t.name == name) return t;
        }
        throw MalformedInputError("NetworkLayout: no tensor named " + name);
    }
};

namespace detail {

inline void push_block_tensors(NetworkLayout& layout, const std::string& prefix, int w_in,
                               int w_out, int temb_dim) {
    auto push = [&](const std::string& name, int rows, int cols, bool trainable) {
        TensorSpec spec{prefix + "." + name, rows, cols, layout.total, trainable};
        layout.total += spec.size();
        layout.tensors.push_back(std::move(spec));
    };
    push("w1", w_out, w_in, true);
    push("b1", w_out, 1, true);
    push("w2", w_out, w_out, true);
    push("b2", w_out, 1, true);
    push("wt", w_out, temb_dim, true);
    push("bt", w_out, 1, true);
    push("gamma", w_out, 1, true);
    push("beta", w_out, 1, true);
    push("running_mean", w_out, 1, false);
    push("running_var", w_out, 1, false);
}

// Block input widths: the encoder starts from io_dim, the decoder from the
// bottleneck width, each feeding the next block's input.
inline std::vector<std::pair<int, int>> block_widths(const NetworkPlan& plan) {
    std::vector<std::pair<int, int>> widths;
    int w = plan.io_dim;
    for (int out : plan.down_dims) {
        widths.emplace_back(w, out);
        w = out;
    }
    for (int out : plan.up_dims) {
        widths.emplace_back(w, out);
        w = out;
    }
    return widths;
}

}  // namespace detail

inline NetworkLayout make_layout(const NetworkPlan& plan) {
    plan.validate();
    NetworkLayout layout;
    const auto widths = detail::block_widths(plan);
    const int n_enc = static_cast<int>(plan.down_dims.size());
    for (std::size_t i = 0; i < widths.size(); ++i) {
        const std::string prefix =
            i < static_cast<std::size_t>(n_enc)
                ? "enc" + std::to_string(i)
                : "dec" + std::to_string(i - n_enc);
        detail::push_block_tensors(layout, prefix, widths[i].first, widths[i].second,
                                   plan.time_embed_dim);
    }
    TensorSpec w_final{"final.w", plan.io_dim, plan.up_dims.back(), layout.total, true};
    layout.total += w_final.size();
    layout.tensors.push_back(std::move(w_final));
    TensorSpec b_final{"final.b", plan.io_dim, 1, layout.total, true};
    layout.total += b_final.size();
    layout.tensors.push_back(std::move(b_final));
    return layout;
}

struct NetworkParams {
    Eigen::VectorXd values;
    long step_count = 0;
};

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<RowMajorMatrix> tensor_view(NetworkParams& params, const TensorSpec& spec) {
    return {params.values.data() + spec.offset, spec.rows, spec.cols};
}

inline Eigen::Map<const RowMajorMatrix> tensor_view(const NetworkParams& params,
                                                    const TensorSpec& spec) {
    return {params.values.data() + spec.offset, spec.rows, spec.cols};
}

// Component 2i = sin(t / 10000^{2i/dim}), component 2i+1 the matching cosine.
inline Eigen::VectorXd sinusoidal_embed(double t, int dim) {
    if (dim < 2 || dim % 2 != 0) {
        throw MalformedInputError("sinusoidal_embed: dim must be even and >= 2");
    }
    Eigen::VectorXd out(dim);
    for (int i = 0; i < dim / 2; ++i) {
        const double rate = std::pow(10000.0, 2.0 * i / dim);
        out[2 * i] = std::sin(t / rate);
        out[2 * i + 1] = std::cos(t / rate);
    }
    return out;
}

namespace detail {

inline bool name_ends_with(const std::string& name, const std::string& suffix) {
    return name.size() >= suffix.size() &&
           name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace detail

// Fan-in-scaled Gaussian weights, zero biases, identity normalization, and a
// zeroed final layer so the untrained network is the zero score.
inline NetworkParams init_params(const NetworkPlan& plan, CounterRng& rng) {
    const NetworkLayout layout = make_layout(plan);
    NetworkParams params;
    params.values = Eigen::VectorXd::Zero(layout.total);
    for (const auto& spec : layout.tensors) {
        auto view = tensor_view(params, spec);
        const bool is_block_weight = detail::name_ends_with(spec.name, ".w1") ||
                                     detail::name_ends_with(spec.name, ".w2") ||
                                     detail::name_ends_with(spec.name, ".wt");
        if (is_block_weight) {
            const double scale = 1.0 / std::sqrt(static_cast<double>(spec.cols));
            for (int r = 0; r < spec.rows; ++r) {
                for (int c = 0; c < spec.cols; ++c) view(r, c) = scale * rng.next_gaussian();
            }
        } else if (detail::name_ends_with(spec.name, ".gamma") ||
                   detail::name_ends_with(spec.name, ".running_var")) {
            view.setOnes();
        }
    }
    return params;
}

enum class ForwardMode { Train, Eval };

struct BlockCache {
    Eigen::MatrixXd input;
    Eigen::MatrixXd z1;
    Eigen::MatrixXd a1;
    Eigen::MatrixXd z2;
    Eigen::MatrixXd summed;
    Eigen::MatrixXd normalized;
    Eigen::VectorXd mean;
    Eigen::VectorXd var;
};

struct ForwardCache {
    ForwardMode mode = ForwardMode::Eval;
    Eigen::MatrixXd embed;
    std::vector<BlockCache> blocks;
    std::vector<Eigen::MatrixXd> encoder_outputs;
    Eigen::MatrixXd final_input;
};

namespace detail {

inline Eigen::MatrixXd silu(const Eigen::MatrixXd& z) {
    return (z.array() / (1.0 + (-z.array()).exp())).matrix();
}

inline Eigen::MatrixXd silu_grad(const Eigen::MatrixXd& z) {
    const Eigen::ArrayXXd sig = 1.0 / (1.0 + (-z.array()).exp());
    return (sig * (1.0 + z.array() * (1.0 - sig))).matrix();
}

inline constexpr double kBnEpsilon = 1e-5;
inline constexpr double kBnMomentum = 0.9;

struct BlockViews {
    Eigen::Map<const RowMajorMatrix> w1, b1, w2, b2, wt, bt, gamma, beta;
    Eigen::Map<const RowMajorMatrix> running_mean, running_var;
};

inline BlockViews block_views(const NetworkParams& params, const NetworkLayout& layout,
                              const std::string& prefix) {
    return {tensor_view(params, layout.find(prefix + ".w1")),
            tensor_view(params, layout.find(prefix + ".b1")),
            tensor_view(params, layout.find(prefix + ".w2")),
            tensor_view(params, layout.find(prefix + ".b2")),
            tensor_view(params, layout.find(prefix + ".wt")),
            tensor_view(params, layout.find(prefix + ".bt")),
            tensor_view(params, layout.find(prefix + ".gamma")),
            tensor_view(params, layout.find(prefix + ".beta")),
            tensor_view(params, layout.find(prefix + ".running_mean")),
            tensor_view(params, layout.find(prefix + ".running_var"))};
}

inline std::string block_prefix(const NetworkPlan& plan, std::size_t index) {
    const std::size_t n_enc = plan.down_dims.size();
    return index < n_enc ? "enc" + std::to_string(index)
                         : "dec" + std::to_string(index - n_enc);
}

// Two dense sublayers with SiLU, an added time projection, then batch
// normalization. Train mode normalizes by batch statistics and refreshes the
// running ones; eval mode uses the stored statistics.
inline Eigen::MatrixXd block_forward(NetworkParams& params, const NetworkLayout& layout,
                                     const std::string& prefix, const Eigen::MatrixXd& input,
                                     const Eigen::MatrixXd& embed, ForwardMode mode,
                                     BlockCache* cache) {
    const BlockViews v = block_views(params, layout, prefix);
    const Eigen::MatrixXd z1 = (v.w1 * input).colwise() + v.b1.col(0);
    const Eigen::MatrixXd a1 = silu(z1);
    const Eigen::MatrixXd z2 = (v.w2 * a1).colwise() + v.b2.col(0);
    const Eigen::MatrixXd summed =
        silu(z2) + ((v.wt * embed).colwise() + v.bt.col(0));

    const double batch = static_cast<double>(summed.cols());
    Eigen::VectorXd mean;
    Eigen::VectorXd var;
    if (mode == ForwardMode::Train) {
        mean = summed.rowwise().mean();
        var = ((summed.colwise() - mean).array().square().rowwise().sum() / batch).matrix();
        auto rm = tensor_view(params, layout.find(prefix + ".running_mean"));
        auto rv = tensor_view(params, layout.find(prefix + ".running_var"));
        rm.col(0) = kBnMomentum * rm.col(0) + (1.0 - kBnMomentum) * mean;
        rv.col(0) = kBnMomentum * rv.col(0) + (1.0 - kBnMomentum) * var;
    } else {
        mean = v.running_mean.col(0);
        var = v.running_var.col(0);
    }
    const Eigen::ArrayXd inv_std = (var.array() + kBnEpsilon).sqrt().inverse();
    Eigen::MatrixXd normalized =
        ((summed.colwise() - mean).array().colwise() * inv_std).matrix();
    Eigen::MatrixXd out =
        (normalized.array().colwise() * v.gamma.col(0).array()).matrix().colwise() +
        v.beta.col(0);

    if (cache != nullptr) {
        cache->input = input;
        cache->z1 = z1;
        cache->a1 = a1;
        cache->z2 = z2;
        cache->summed = summed;
        cache->normalized = normalized;
        cache->mean = mean;
        cache->var = var;
    }
    return out;
}

inline void check_finite(const Eigen::MatrixXd& values, const std::string& where,
                         double t_hint) {
    if (values.allFinite()) return;
    throw NumericalBlowupError("forward: non-finite activations in " + where, t_hint,
                               std::numeric_limits<double>::infinity());
}

}  // namespace detail

// Batched forward pass; samples are columns of x, times[i] is the normalized
// time of column i. Train mode mutates the running normalization statistics.
inline Eigen::MatrixXd forward_batch(NetworkParams& params, const NetworkPlan& plan,
                                     const Eigen::VectorXd& times, const Eigen::MatrixXd& x,
                                     ForwardMode mode, ForwardCache* cache = nullptr) {
    plan.validate();
    const NetworkLayout layout = make_layout(plan);
    if (params.values.size() != layout.total) {
        throw IncompatibleModelError("forward_batch: parameter buffer has " +
                                     std::to_string(params.values.size()) +
                                     " entries, plan needs " + std::to_string(layout.total));
    }
    if (x.rows() != plan.io_dim) {
        throw MalformedInputError("forward_batch: input has " + std::to_string(x.rows()) +
                                  " rows, plan expects " + std::to_string(plan.io_dim));
    }
    if (x.cols() < 1 || times.size() != x.cols()) {
        throw MalformedInputError("forward_batch: need one time per sample column");
    }
    const double t_hint = times[0];

    Eigen::MatrixXd embed(plan.time_embed_dim, x.cols());
    for (int b = 0; b < x.cols(); ++b) {
        embed.col(b) = sinusoidal_embed(times[b], plan.time_embed_dim);
    }

    const std::size_t n_enc = plan.down_dims.size();
    const std::size_t n_blocks = n_enc + plan.up_dims.size();
    if (cache != nullptr) {
        cache->mode = mode;
        cache->embed = embed;
        cache->blocks.assign(n_blocks, BlockCache{});
        cache->encoder_outputs.clear();
    }

    std::vector<Eigen::MatrixXd> encoder_outputs;
    encoder_outputs.reserve(n_enc);
    Eigen::MatrixXd h = x;
    for (std::size_t i = 0; i < n_enc; ++i) {
        const std::string prefix = detail::block_prefix(plan, i);
        h = detail::block_forward(params, layout, prefix, h, embed, mode,
                                  cache != nullptr ? &cache->blocks[i] : nullptr);
        detail::check_finite(h, "encoder block " + std::to_string(i), t_hint);
        encoder_outputs.push_back(h);
    }

    // Decoder: block j consumes d_j and the skip adds the mirrored encoder
    // output, whose width matches under the reversed plan.
    for (std::size_t j = 0; j < plan.up_dims.size(); ++j) {
        const std::string prefix = detail::block_prefix(plan, n_enc + j);
        Eigen::MatrixXd u =
            detail::block_forward(params, layout, prefix, h, embed, mode,
                                  cache != nullptr ? &cache->blocks[n_enc + j] : nullptr);
        detail::check_finite(u, "decoder block " + std::to_string(j), t_hint);
        h = u + encoder_outputs[n_enc - 1 - j];
    }

    if (cache != nullptr) {
        cache->encoder_outputs = encoder_outputs;
        cache->final_input = h;
    }
    Eigen::MatrixXd out =
        (tensor_view(params, layout.find("final.w")) * h).colwise() +
        tensor_view(params, layout.find("final.b")).col(0);
    detail::check_finite(out, "final layer", t_hint);
    return out;
}

inline Eigen::VectorXd forward_eval(const NetworkParams& params, const NetworkPlan& plan,
                                    double t, const Eigen::VectorXd& x) {
    // Eval mode never writes; the mutable reference is only demanded by the
    // running-statistics path of train mode.
    NetworkParams& mutable_params = const_cast<NetworkParams&>(params);
    Eigen::VectorXd times = Eigen::VectorXd::Constant(1, t);
    return forward_batch(mutable_params, plan, times, x, ForwardMode::Eval).col(0);
}

namespace detail {

struct BlockGrads {
    Eigen::MatrixXd d_input;
};

// Reverse of block_forward for a train-mode cache: batch-statistic
// normalization backprop, the two SiLU dense sublayers, and the time
// projection (whose embedding gradient is discarded; time is not learned).
inline BlockGrads block_backward(const NetworkParams& params, const NetworkLayout& layout,
                                 const std::string& prefix, const BlockCache& cache,
                                 const Eigen::MatrixXd& embed, const Eigen::MatrixXd& d_out,
                                 Eigen::VectorXd& grad) {
    const BlockViews v = block_views(params, layout, prefix);
    const double batch = static_cast<double>(d_out.cols());
    const Eigen::ArrayXd inv_std = (cache.var.array() + kBnEpsilon).sqrt().inverse();
    const Eigen::MatrixXd centered = cache.summed.colwise() - cache.mean;

    auto grad_view = [&](const std::string& name) {
        const TensorSpec& spec = layout.find(prefix + "." + name);
        return Eigen::Map<RowMajorMatrix>(grad.data() + spec.offset, spec.rows, spec.cols);
    };

    grad_view("gamma").col(0) +=
        (d_out.array() * cache.normalized.array()).rowwise().sum().matrix();
    grad_view("beta").col(0) += d_out.rowwise().sum();

    const Eigen::MatrixXd d_norm =
        (d_out.array().colwise() * v.gamma.col(0).array()).matrix();
    const Eigen::ArrayXd d_var =
        (d_norm.array() * centered.array()).rowwise().sum() *
        (-0.5 * inv_std.pow(3.0));
    const Eigen::ArrayXd d_mean =
        -(d_norm.array().colwise() * inv_std).rowwise().sum() +
        d_var * (-2.0 / batch) * centered.array().rowwise().sum();
    Eigen::MatrixXd d_summed =
        (d_norm.array().colwise() * inv_std +
         centered.array().colwise() * (d_var * (2.0 / batch)) +
         (d_mean / batch).replicate(1, d_out.cols()))
            .matrix();

    // Time projection branch.
    grad_view("wt") += d_summed * embed.transpose();
    grad_view("bt").col(0) += d_summed.rowwise().sum();

    // Main branch.
    const Eigen::MatrixXd d_z2 =
        (d_summed.array() * silu_grad(cache.z2).array()).matrix();
    grad_view("w2") += d_z2 * cache.a1.transpose();
    grad_view("b2").col(0) += d_z2.rowwise().sum();
    const Eigen::MatrixXd d_a1 = v.w2.transpose() * d_z2;
    const Eigen::MatrixXd d_z1 = (d_a1.array() * silu_grad(cache.z1).array()).matrix();
    grad_view("w1") += d_z1 * cache.input.transpose();
    grad_view("b1").col(0) += d_z1.rowwise().sum();
    return {v.w1.transpose() * d_z1};
}

}  // namespace detail

// Exact gradients of the batch loss with respect to every trainable
// parameter, given the upstream gradient on the network output. Entries for
// running statistics stay zero.
inline Eigen::VectorXd backward_batch(const NetworkParams& params, const NetworkPlan& plan,
                                      const ForwardCache& cache,
                                      const Eigen::MatrixXd& d_output) {
    if (cache.mode != ForwardMode::Train) {
        throw MalformedInputError("backward_batch: needs a train-mode forward cache");
    }
    const NetworkLayout layout = make_layout(plan);
    if (d_output.rows() != plan.io_dim ||
        d_output.cols() != cache.final_input.cols()) {
        throw MalformedInputError("backward_batch: upstream gradient shape mismatch");
    }
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(layout.total);

    {
        const TensorSpec& wf = layout.find("final.w");
        const TensorSpec& bf = layout.find("final.b");
        Eigen::Map<RowMajorMatrix>(grad.data() + wf.offset, wf.rows, wf.cols) +=
            d_output * cache.final_input.transpose();
        Eigen::Map<RowMajorMatrix>(grad.data() + bf.offset, bf.rows, bf.cols).col(0) +=
            d_output.rowwise().sum();
    }

    const std::size_t n_enc = plan.down_dims.size();
    const std::size_t n_dec = plan.up_dims.size();
    std::vector<Eigen::MatrixXd> d_encoder(n_enc);
    for (std::size_t i = 0; i < n_enc; ++i) {
        d_encoder[i] = Eigen::MatrixXd::Zero(plan.down_dims[i], d_output.cols());
    }

    Eigen::MatrixXd d_block_out =
        tensor_view(params, layout.find("final.w")).transpose() * d_output;
    // d_block_out holds the gradient of d_{j+1} = u_j + skip; peel decoder
    // blocks from the top.
    for (std::size_t r = 0; r < n_dec; ++r) {
        const std::size_t j = n_dec - 1 - r;
        d_encoder[n_enc - 1 - j] += d_block_out;
        const std::string prefix = detail::block_prefix(plan, n_enc + j);
        d_block_out = detail::block_backward(params, layout, prefix, cache.blocks[n_enc + j],
                                             cache.embed, d_block_out, grad)
                          .d_input;
    }
    d_encoder[n_enc - 1] += d_block_out;

    Eigen::MatrixXd d_input;
    for (std::size_t r = 0; r < n_enc; ++r) {
        const std::size_t i = n_enc - 1 - r;
        const std::string prefix = detail::block_prefix(plan, i);
        d_input = detail::block_backward(params, layout, prefix, cache.blocks[i],
                                         cache.embed, d_encoder[i], grad)
                      .d_input;
        if (i > 0) d_encoder[i - 1] += d_input;
    }
    return grad;
}

// Checkpoint container: magic, version, a JSON header with the plan and step
// count, then the flat parameter buffer as little-endian 64-bit floats in
// declaration order.
inline constexpr char kCheckpointMagic[8] = {'S', 'B', 'N', 'E', 'T', 'C', 'K', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const NetworkPlan& plan,
                            const NetworkParams& params) {
    const NetworkLayout layout = make_layout(plan);
    if (params.values.size() != layout.total) {
        throw IncompatibleModelError("save_checkpoint: parameter count mismatch");
    }
    nlohmann::json header;
    header["io_dim"] = plan.io_dim;
    header["time_embed_dim"] = plan.time_embed_dim;
    header["down_dims"] = plan.down_dims;
    header["up_dims"] = plan.up_dims;
    header["activation"] = plan.activation;
    header["step_count"] = params.step_count;
    header["param_count"] = layout.total;
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw MalformedInputError("save_checkpoint: cannot open " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    const std::uint32_t version = kCheckpointVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint64_t header_len = text.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(params.values.data()),
              static_cast<std::streamsize>(layout.total * sizeof(double)));
    if (!out) throw MalformedInputError("save_checkpoint: write failed for " + path);
}

inline std::pair<NetworkPlan, NetworkParams> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MalformedInputError("load_checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw IncompatibleModelError("load_checkpoint: " + path + " is not a checkpoint");
    }
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!in || version != kCheckpointVersion) {
        throw IncompatibleModelError("load_checkpoint: unsupported version " +
                                     std::to_string(version));
    }
    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    if (!in || header_len > (1u << 20)) {
        throw MalformedInputError("load_checkpoint: corrupt header length");
    }
    std::string text(header_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw MalformedInputError("load_checkpoint: truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw MalformedInputError(std::string("load_checkpoint: bad header: ") + e.what());
    }
    NetworkPlan plan;
    NetworkParams params;
    try {
        plan.io_dim = header.at("io_dim").get<int>();
        plan.time_embed_dim = header.at("time_embed_dim").get<int>();
        plan.down_dims = header.at("down_dims").get<std::vector<int>>();
        plan.up_dims = header.at("up_dims").get<std::vector<int>>();
        plan.activation = header.at("activation").get<std::string>();
        params.step_count = header.at("step_count").get<long>();
    } catch (const nlohmann::json::exception& e) {
        throw MalformedInputError(std::string("load_checkpoint: missing field: ") + e.what());
    }
    const NetworkLayout layout = make_layout(plan);
    if (header.at("param_count").get<long>() != layout.total) {
        throw IncompatibleModelError("load_checkpoint: parameter count disagrees with plan");
    }
    params.values.resize(layout.total);
    in.read(reinterpret_cast<char*>(params.values.data()),
            static_cast<std::streamsize>(layout.total * sizeof(double)));
    if (!in) throw MalformedInputError("load_checkpoint: truncated parameters");
    if (!params.values.allFinite()) {
        throw MalformedInputError("load_checkpoint: non-finite parameters");
    }
    for (const auto& spec : layout.tensors) {
        if (spec.name.find("running_var") != std::string::npos) {
            if (tensor_view(params, spec).minCoeff() <= 0.0) {
                throw MalformedInputError("load_checkpoint: running variance must be positive");
            }
        }
    }
    return {plan, params};
}

}  // namespace shapebridge
