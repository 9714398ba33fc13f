#pragma once

// Tanh feedforward networks with exact reverse-mode gradients. Layer widths
// here are tens of units, so everything is plain dense arithmetic; the
// forward pass records per-layer activations for the matching backward pass.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "nlox/linalg.hpp"
#include "nlox/rng.hpp"

namespace nlox {

struct MlpLayer {
    Mat weight; // d_out x d_in
    Vec bias;   // d_out
};

struct MlpParams {
    std::vector<MlpLayer> layers; // tanh after every layer except the last

    std::size_t input_dim() const { return layers.front().weight.cols(); }
    std::size_t output_dim() const { return layers.back().weight.rows(); }

    std::vector<std::size_t> dims() const {
        std::vector<std::size_t> d{input_dim()};
        for (const auto& l : layers) d.push_back(l.weight.rows());
        return d;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weight.size() + l.bias.size();
        return n;
    }

    /// Frobenius norm over all weights and biases (logged per epoch).
    double parameter_norm() const {
        double s = 0.0;
        for (const auto& l : layers) {
            for (std::size_t i = 0; i < l.weight.size(); ++i)
                s += l.weight.data()[i] * l.weight.data()[i];
            for (double b : l.bias) s += b * b;
        }
        return std::sqrt(s);
    }

    /// Bound on ||output||_2 valid for any input: the last layer is affine in
    /// activations that tanh confines to (-1, 1).
    double output_bound() const {
        const auto& last = layers.back();
        double row_sq = 0.0;
        for (std::size_t i = 0; i < last.weight.size(); ++i)
            row_sq += last.weight.data()[i] * last.weight.data()[i];
        return std::sqrt(row_sq * static_cast<double>(last.weight.cols())) + norm2(last.bias);
    }

    /// Product of layer Frobenius norms: a computable Lipschitz bound.
    double lipschitz_bound() const {
        double prod = 1.0;
        for (const auto& l : layers) prod *= frobenius_norm(l.weight);
        return prod;
    }
};

/// Per-layer activations from one forward pass; input + post-activation of
/// every layer. Pre-activations are not stored: tanh' = 1 - tanh^2 recovers
/// the derivative from the stored output.
struct MlpCache {
    std::vector<Vec> activations; // size layers+1; [0] is the input
};

struct MlpGradients {
    std::vector<MlpLayer> layers;

    void assign_zero_like(const MlpParams& params) {
        layers.resize(params.layers.size());
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& src = params.layers[l];
            layers[l].weight = Mat(src.weight.rows(), src.weight.cols());
            layers[l].bias.assign(src.bias.size(), 0.0);
        }
    }

    void zero() {
        for (auto& l : layers) {
            std::fill(l.weight.data(), l.weight.data() + l.weight.size(), 0.0);
            std::fill(l.bias.begin(), l.bias.end(), 0.0);
        }
    }
};

inline MlpParams init_params(const std::vector<std::size_t>& layer_dims, std::uint64_t seed) {
    if (layer_dims.size() < 2) throw numeric_error("init_params: need at least two layer dims");
    Rng rng(seed);
    MlpParams p;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        MlpLayer layer;
        const std::size_t d_in = layer_dims[l], d_out = layer_dims[l + 1];
        layer.weight = Mat(d_out, d_in);
        const double bound = std::sqrt(6.0 / static_cast<double>(d_in + d_out));
        for (std::size_t i = 0; i < layer.weight.size(); ++i)
            layer.weight.data()[i] = rng.uniform(-bound, bound);
        layer.bias.assign(d_out, 0.0);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

/// Forward pass; fills the cache for a later backward call.
inline void mlp_forward(const MlpParams& params, const Vec& input, Vec& output, MlpCache& cache) {
    if (input.size() != params.input_dim())
        throw numeric_error("mlp_forward: input dimension mismatch");
    const std::size_t depth = params.layers.size();
    cache.activations.resize(depth + 1);
    cache.activations[0] = input;
    for (std::size_t l = 0; l < depth; ++l) {
        const auto& layer = params.layers[l];
        Vec& out = (l + 1 == depth) ? output : cache.activations[l + 1];
        out = layer.bias;
        matvec_acc(layer.weight, cache.activations[l], out);
        if (l + 1 < depth)
            for (double& v : out) v = std::tanh(v);
        else
            cache.activations[depth] = out;
    }
}

inline Vec mlp_forward(const MlpParams& params, const Vec& input) {
    Vec out;
    MlpCache cache;
    mlp_forward(params, input, out, cache);
    return out;
}

/// Reverse-mode pass for the scalar output_grad^T * output. Accumulates
/// parameter gradients into `grads` (callers zero it when starting a fresh
/// accumulation) and writes the gradient w.r.t. the input.
inline void mlp_backward(const MlpParams& params, const MlpCache& cache, const Vec& output_grad,
                         MlpGradients& grads, Vec& input_grad) {
    const std::size_t depth = params.layers.size();
    if (cache.activations.size() != depth + 1)
        throw numeric_error("mlp_backward: cache does not match network depth");
    Vec delta = output_grad; // dL/d(layer output), starting at the top
    for (std::size_t l = depth; l-- > 0;) {
        const auto& layer = params.layers[l];
        auto& g = grads.layers[l];
        const Vec& below = cache.activations[l];
        if (l + 1 < depth) {
            // Through tanh of this layer's output.
            const Vec& act = cache.activations[l + 1];
            for (std::size_t i = 0; i < delta.size(); ++i) delta[i] *= 1.0 - act[i] * act[i];
        }
        for (std::size_t i = 0; i < layer.weight.rows(); ++i) {
            const double d = delta[i];
            if (d == 0.0) continue;
            double* grow = g.weight.row(i);
            const double* brow = below.data();
            for (std::size_t j = 0; j < layer.weight.cols(); ++j) grow[j] += d * brow[j];
            g.bias[i] += d;
        }
        Vec next(layer.weight.cols(), 0.0);
        for (std::size_t i = 0; i < layer.weight.rows(); ++i) {
            const double d = delta[i];
            if (d == 0.0) continue;
            const double* wrow = layer.weight.row(i);
            for (std::size_t j = 0; j < next.size(); ++j) next[j] += d * wrow[j];
        }
        delta = std::move(next);
    }
    input_grad = std::move(delta);
}

// ---------------------------------------------------------------------------
// RMSprop
// ---------------------------------------------------------------------------

struct RmspropState {
    std::vector<MlpLayer> accumulator; // squared-gradient running average
    double decay = 0.9;
    double epsilon = 1e-8;
    double learning_rate = 1e-5;

    void assign_zero_like(const MlpParams& params) {
        accumulator.resize(params.layers.size());
        for (std::size_t l = 0; l < accumulator.size(); ++l) {
            const auto& src = params.layers[l];
            accumulator[l].weight = Mat(src.weight.rows(), src.weight.cols());
            accumulator[l].bias.assign(src.bias.size(), 0.0);
        }
    }
};

namespace detail {
inline void rmsprop_apply(double* param, const double* grad, double* acc, std::size_t n,
                          const RmspropState& s) {
    for (std::size_t i = 0; i < n; ++i) {
        acc[i] = s.decay * acc[i] + (1.0 - s.decay) * grad[i] * grad[i];
        param[i] -= s.learning_rate * grad[i] / (std::sqrt(acc[i]) + s.epsilon);
    }
}
} // namespace detail

/// One RMSprop update. Rejects non-finite gradients without touching params.
inline bool rmsprop_update(MlpParams& params, const MlpGradients& grads, RmspropState& state) {
    for (const auto& g : grads.layers) {
        if (!all_finite(g.weight) || !all_finite(g.bias)) return false;
    }
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& p = params.layers[l];
        const auto& g = grads.layers[l];
        auto& a = state.accumulator[l];
        detail::rmsprop_apply(p.weight.data(), g.weight.data(), a.weight.data(), p.weight.size(),
                              state);
        detail::rmsprop_apply(p.bias.data(), g.bias.data(), a.bias.data(), p.bias.size(), state);
    }
    return true;
}

// ---------------------------------------------------------------------------
// Persistence: text header + little-endian float64 payload
// ---------------------------------------------------------------------------

inline void save_params(const MlpParams& params, const std::string& path,
                        std::uint64_t seed = 0) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("save_params: cannot open " + path);
    out << "nlox-mlp 1\n";
    out << "dims";
    for (std::size_t d : params.dims()) out << ' ' << d;
    out << "\nactivation tanh\nseed " << seed << "\ndata\n";
    for (const auto& layer : params.layers) {
        out.write(reinterpret_cast<const char*>(layer.weight.data()),
                  static_cast<std::streamsize>(layer.weight.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(layer.bias.data()),
                  static_cast<std::streamsize>(layer.bias.size() * sizeof(double)));
    }
    if (!out) throw io_error("save_params: write failed for " + path);
}

inline MlpParams load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("load_params: cannot open " + path);
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "nlox-mlp" || version != 1)
        throw io_error("load_params: unrecognized header in " + path);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    std::istringstream dims_line(line);
    std::string tag;
    dims_line >> tag;
    if (tag != "dims") throw io_error("load_params: missing dims in " + path);
    std::vector<std::size_t> dims;
    for (std::size_t d = 0; dims_line >> d;) dims.push_back(d);
    if (dims.size() < 2) throw io_error("load_params: bad dims in " + path);
    while (std::getline(in, line) && line != "data") {
    }
    if (line != "data") throw io_error("load_params: missing data section in " + path);
    MlpParams p;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        MlpLayer layer;
        layer.weight = Mat(dims[l + 1], dims[l]);
        layer.bias.assign(dims[l + 1], 0.0);
        in.read(reinterpret_cast<char*>(layer.weight.data()),
                static_cast<std::streamsize>(layer.weight.size() * sizeof(double)));
        in.read(reinterpret_cast<char*>(layer.bias.data()),
                static_cast<std::streamsize>(layer.bias.size() * sizeof(double)));
        if (!in) throw io_error("load_params: truncated payload in " + path);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

} // namespace nlox
