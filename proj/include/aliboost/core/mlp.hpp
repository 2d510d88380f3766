#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "aliboost/core/error.hpp"
#include "aliboost/core/types.hpp"

namespace aliboost {

enum class Activation { identity, relu, tanh };

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
    }
    return "identity";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "identity") return Activation::identity;
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    throw ConfigError("unknown activation '" + s + "'");
}

inline double activate(Activation a, double x) {
    switch (a) {
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::tanh: return std::tanh(x);
        case Activation::identity: break;
    }
    return x;
}

// Derivative expressed through the pre-activation and the activated value.
inline double activate_grad(Activation a, double pre, double post) {
    switch (a) {
        case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::tanh: return 1.0 - post * post;
        case Activation::identity: break;
    }
    return 1.0;
}

/// Dense feed-forward network with a scalar output logit.
///
/// Parameters live in one flat buffer (per layer: row-major W, then b) so that
/// optimizers, L2 penalties and finite-difference checks can treat the whole
/// network as a single vector. Layer l maps sizes[l] -> sizes[l+1] and applies
/// activations[l]; the last activation is normally identity and the caller
/// applies the logistic squashing.
class Mlp {
public:
    struct Trace {
        std::vector<Vec> pre;   // pre-activation per layer
        std::vector<Vec> post;  // activated output per layer
    };

    Mlp() = default;

    Mlp(std::vector<int> sizes, std::vector<Activation> activations)
        : sizes_(std::move(sizes)), activations_(std::move(activations)) {
        if (sizes_.size() < 2 || activations_.size() + 1 != sizes_.size()) {
            throw ConfigError("mlp: need at least one layer and one activation per layer");
        }
        if (sizes_.back() != 1) throw ConfigError("mlp: output layer must have width 1");
        std::size_t total = 0;
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            if (sizes_[l] <= 0 || sizes_[l + 1] <= 0) throw ConfigError("mlp: layer sizes must be positive");
            weight_offset_.push_back(total);
            total += static_cast<std::size_t>(sizes_[l]) * static_cast<std::size_t>(sizes_[l + 1]);
            bias_offset_.push_back(total);
            total += static_cast<std::size_t>(sizes_[l + 1]);
        }
        params_.assign(total, 0.0);
    }

    std::size_t layer_count() const { return activations_.size(); }
    std::size_t input_dim() const { return sizes_.empty() ? 0 : static_cast<std::size_t>(sizes_.front()); }
    const std::vector<int>& sizes() const { return sizes_; }
    const std::vector<Activation>& activations() const { return activations_; }
    std::size_t param_count() const { return params_.size(); }

    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }

    double& weight(std::size_t layer, std::size_t row, std::size_t col) {
        return params_[weight_offset_[layer] + row * static_cast<std::size_t>(sizes_[layer]) + col];
    }
    double weight(std::size_t layer, std::size_t row, std::size_t col) const {
        return params_[weight_offset_[layer] + row * static_cast<std::size_t>(sizes_[layer]) + col];
    }
    double& bias(std::size_t layer, std::size_t row) { return params_[bias_offset_[layer] + row]; }
    double bias(std::size_t layer, std::size_t row) const { return params_[bias_offset_[layer] + row]; }

    /// Scaled uniform init (Glorot-style bound scaled by `gain`); biases start at zero.
    void init_uniform(Rng& rng, double gain = 1.0) {
        for (std::size_t l = 0; l < layer_count(); ++l) {
            const double bound = gain * std::sqrt(6.0 / (sizes_[l] + sizes_[l + 1]));
            std::uniform_real_distribution<double> dist(-bound, bound);
            const std::size_t n = static_cast<std::size_t>(sizes_[l]) * static_cast<std::size_t>(sizes_[l + 1]);
            for (std::size_t k = 0; k < n; ++k) params_[weight_offset_[l] + k] = dist(rng);
            for (int r = 0; r < sizes_[l + 1]; ++r) params_[bias_offset_[l] + r] = 0.0;
        }
    }

    double forward(std::span<const double> x) const {
        Trace scratch;
        return forward(x, scratch);
    }

    double forward(std::span<const double> x, Trace& trace) const {
        if (x.size() != input_dim()) {
            throw FeatureError("mlp: input dimension " + std::to_string(x.size()) + " != " +
                               std::to_string(input_dim()));
        }
        trace.pre.resize(layer_count());
        trace.post.resize(layer_count());
        std::span<const double> in = x;
        for (std::size_t l = 0; l < layer_count(); ++l) {
            const auto rows = static_cast<std::size_t>(sizes_[l + 1]);
            const auto cols = static_cast<std::size_t>(sizes_[l]);
            Vec& pre = trace.pre[l];
            Vec& post = trace.post[l];
            pre.resize(rows);
            post.resize(rows);
            const double* w = params_.data() + weight_offset_[l];
            const double* b = params_.data() + bias_offset_[l];
            for (std::size_t r = 0; r < rows; ++r) {
                double s = b[r];
                const double* wr = w + r * cols;
                for (std::size_t c = 0; c < cols; ++c) s += wr[c] * in[c];
                pre[r] = s;
                post[r] = activate(activations_[l], s);
            }
            in = post;
        }
        return trace.post.back()[0];
    }

    /// Finishes a forward pass given layer 0's pre-activation (for callers that
    /// assemble W_1 x + b_1 from cached partial sums).
    double forward_from_first_pre(std::span<const double> pre0) const {
        Vec in(pre0.size());
        for (std::size_t r = 0; r < pre0.size(); ++r) in[r] = activate(activations_[0], pre0[r]);
        Vec out;
        for (std::size_t l = 1; l < layer_count(); ++l) {
            const auto rows = static_cast<std::size_t>(sizes_[l + 1]);
            const auto cols = static_cast<std::size_t>(sizes_[l]);
            out.assign(rows, 0.0);
            const double* w = params_.data() + weight_offset_[l];
            const double* b = params_.data() + bias_offset_[l];
            for (std::size_t r = 0; r < rows; ++r) {
                double s = b[r];
                const double* wr = w + r * cols;
                for (std::size_t c = 0; c < cols; ++c) s += wr[c] * in[c];
                out[r] = activate(activations_[l], s);
            }
            in.swap(out);
        }
        return in[0];
    }

    /// Back-propagates d(loss)/d(output) through a recorded forward pass.
    /// Parameter gradients are accumulated (+=) into `param_grad`; the input
    /// gradient is written (overwritten) into `input_grad` when it is non-empty.
    void backward(const Trace& trace, std::span<const double> x, double d_output, std::span<double> param_grad,
                  std::span<double> input_grad = {}) const {
        Vec delta{d_output};
        for (std::size_t li = layer_count(); li-- > 0;) {
            const auto rows = static_cast<std::size_t>(sizes_[li + 1]);
            const auto cols = static_cast<std::size_t>(sizes_[li]);
            for (std::size_t r = 0; r < rows; ++r) {
                delta[r] *= activate_grad(activations_[li], trace.pre[li][r], trace.post[li][r]);
            }
            std::span<const double> in = li == 0 ? x : std::span<const double>(trace.post[li - 1]);
            double* gw = param_grad.data() + weight_offset_[li];
            double* gb = param_grad.data() + bias_offset_[li];
            for (std::size_t r = 0; r < rows; ++r) {
                gb[r] += delta[r];
                double* gwr = gw + r * cols;
                for (std::size_t c = 0; c < cols; ++c) gwr[c] += delta[r] * in[c];
            }
            if (li == 0 && input_grad.empty()) break;
            Vec next(cols, 0.0);
            const double* w = params_.data() + weight_offset_[li];
            for (std::size_t r = 0; r < rows; ++r) {
                const double* wr = w + r * cols;
                for (std::size_t c = 0; c < cols; ++c) next[c] += wr[c] * delta[r];
            }
            if (li == 0) {
                std::copy(next.begin(), next.end(), input_grad.begin());
            }
            delta = std::move(next);
        }
    }

private:
    std::vector<int> sizes_;
    std::vector<Activation> activations_;
    std::vector<std::size_t> weight_offset_;
    std::vector<std::size_t> bias_offset_;
    Vec params_;
};

struct AdamConfig {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// One Adam update on a parameter block; `t` is the 1-based step count shared
/// by all blocks updated in the same step.
inline void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                        std::span<double> v, long t, const AdamConfig& cfg) {
    if (cfg.learning_rate == 0.0) return;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * grads[k];
        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * grads[k] * grads[k];
        params[k] -= cfg.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.epsilon);
    }
}

}  // namespace aliboost
