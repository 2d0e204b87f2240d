#pragma once

// Adam with decoupled weight decay and a linear warmup / linear decay
// learning-rate schedule. Moments are kept as flat buffers aligned with the
// parameter registry order.

#include <cstdint>
#include <vector>

#include "finlm/tensor.hpp"

namespace finlm::model {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-6;
    double weight_decay = 0.01;  // skipped for biases and layer-norm terms
    double peak_lr = 1e-4;
    std::int64_t warmup_steps = 0;
    std::int64_t total_steps = 0;
};

// Linear warmup to peak_lr, then linear decay to 0 at total_steps. `step` is
// 1-based (the step about to be applied).
inline double lr_at(const AdamConfig& cfg, std::int64_t step) {
    if (cfg.total_steps <= 0) return cfg.peak_lr;
    if (cfg.warmup_steps > 0 && step <= cfg.warmup_steps)
        return cfg.peak_lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
    std::int64_t decay_span = cfg.total_steps - cfg.warmup_steps;
    if (decay_span <= 0) return cfg.peak_lr;
    double remaining = static_cast<double>(cfg.total_steps - step) / static_cast<double>(decay_span);
    return cfg.peak_lr * std::max(0.0, remaining);
}

struct OptimizerState {
    AdamConfig cfg;
    std::int64_t step = 0;
    std::vector<std::vector<float>> m;  // aligned with the tensor registry
    std::vector<std::vector<float>> v;

    template <class S>
    void reset(const std::vector<TensorView<S>>& tensors, AdamConfig config) {
        cfg = config;
        step = 0;
        m.clear();
        v.clear();
        for (const TensorView<S>& t : tensors) {
            m.emplace_back(static_cast<std::size_t>(t.size), 0.0f);
            v.emplace_back(static_cast<std::size_t>(t.size), 0.0f);
        }
    }
};

// One update over registry-aligned parameter and gradient views. Update math
// runs in double; parameters and moments stay float32.
inline void adam_step(OptimizerState& state, const std::vector<TensorView<float>>& params,
                      const std::vector<TensorView<float>>& grads) {
    ++state.step;
    const AdamConfig& c = state.cfg;
    double lr = lr_at(c, state.step);
    double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t t = 0; t < params.size(); ++t) {
        float* p = params[t].data;
        const float* g = grads[t].data;
        float* mt = state.m[t].data();
        float* vt = state.v[t].data();
        bool decay = params[t].decay && c.weight_decay > 0.0;
        for (std::ptrdiff_t k = 0; k < params[t].size; ++k) {
            double gk = g[k];
            double mk = c.beta1 * mt[k] + (1.0 - c.beta1) * gk;
            double vk = c.beta2 * vt[k] + (1.0 - c.beta2) * gk * gk;
            mt[k] = static_cast<float>(mk);
            vt[k] = static_cast<float>(vk);
            double update = (mk / bc1) / (std::sqrt(vk / bc2) + c.eps);
            if (decay) update += c.weight_decay * p[k];
            p[k] = static_cast<float>(p[k] - lr * update);
        }
    }
}

}  // namespace finlm::model
