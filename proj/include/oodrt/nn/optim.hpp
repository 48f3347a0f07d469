#pragma once

#include <cmath>
#include <vector>

#include "oodrt/nn/model.hpp"

namespace oodrt::nn {

struct SgdConfig {
    float learning_rate = 0.01f;
    float momentum = 0.9f;
    float clip_norm = 0.0f;  // global gradient-norm clip; 0 disables
};

// Momentum buffers, one per parameter tensor (heavy-ball form: v = m*v + g,
// p -= lr*v).
using MomentumState = std::vector<Tensor>;

inline void check_finite(const Gradients& g) {
    for (std::size_t i = 0; i < g.params.size(); ++i)
        for (float v : g.params[i].values())
            if (!std::isfinite(v)) throw training_error("non-finite gradient in " + g.names[i]);
}

inline void sgd_update(ModelGraph& model, const Gradients& grads, const SgdConfig& cfg, MomentumState& velocity) {
    auto& params = model.params();
    if (grads.params.size() != params.size()) throw argument_error("sgd: gradient count does not match model");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (grads.params[i].dims() != params[i].value.dims())
            throw argument_error("sgd: gradient shape mismatch for " + params[i].name);
    check_finite(grads);
    float scale = 1.0f;
    if (cfg.clip_norm > 0.0f) {
        const double n = std::sqrt(grads.squared_norm());
        if (n > cfg.clip_norm) scale = static_cast<float>(cfg.clip_norm / n);
    }
    if (velocity.size() != params.size()) {
        velocity.clear();
        for (const auto& p : params) velocity.emplace_back(p.value.dims());
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i].value.values();
        auto& v = velocity[i].values();
        const auto& g = grads.params[i].values();
        for (std::size_t j = 0; j < p.size(); ++j) {
            v[j] = cfg.momentum * v[j] + scale * g[j];
            p[j] -= cfg.learning_rate * v[j];
        }
    }
}

// Value-returning form: the updated copy of `model`.
inline ModelGraph sgd_step(ModelGraph model, const Gradients& grads, float learning_rate, float momentum,
                           MomentumState& velocity) {
    sgd_update(model, grads, SgdConfig{learning_rate, momentum, 0.0f}, velocity);
    return model;
}

// Adam with bias correction. Used for the VAE and detector, where plain
// momentum SGD needs many more epochs than the desk-scale budget allows.
struct AdamConfig {
    float learning_rate = 1e-3f;
    float beta1 = 0.9f, beta2 = 0.999f, eps = 1e-8f;
    float clip_norm = 0.0f;
};

class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(ModelGraph& model, const Gradients& grads) {
        auto& params = model.params();
        if (grads.params.size() != params.size()) throw argument_error("adam: gradient count does not match model");
        check_finite(grads);
        if (m_.size() != params.size()) {
            m_.clear();
            v_.clear();
            for (const auto& p : params) {
                m_.emplace_back(p.value.dims());
                v_.emplace_back(p.value.dims());
            }
        }
        float scale = 1.0f;
        if (cfg_.clip_norm > 0.0f) {
            const double n = std::sqrt(grads.squared_norm());
            if (n > cfg_.clip_norm) scale = static_cast<float>(cfg_.clip_norm / n);
        }
        ++t_;
        const double c1 = 1.0 - std::pow(static_cast<double>(cfg_.beta1), t_);
        const double c2 = 1.0 - std::pow(static_cast<double>(cfg_.beta2), t_);
        const auto lr = static_cast<float>(cfg_.learning_rate * std::sqrt(c2) / c1);
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i].value.values();
            auto& m = m_[i].values();
            auto& v = v_[i].values();
            const auto& g = grads.params[i].values();
            if (g.size() != p.size()) throw argument_error("adam: gradient shape mismatch for " + params[i].name);
            for (std::size_t j = 0; j < p.size(); ++j) {
                const float gj = scale * g[j];
                m[j] = cfg_.beta1 * m[j] + (1.0f - cfg_.beta1) * gj;
                v[j] = cfg_.beta2 * v[j] + (1.0f - cfg_.beta2) * gj * gj;
                p[j] -= lr * m[j] / (std::sqrt(v[j]) + cfg_.eps);
            }
        }
    }

private:
    AdamConfig cfg_;
    std::vector<Tensor> m_, v_;
    int t_ = 0;
};

}  // namespace oodrt::nn
