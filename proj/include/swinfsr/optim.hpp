#pragma once

#include "swinfsr/tensor.hpp"

namespace swinfsr {

// Cosine annealing from lr_max at step 0 to lr_min at step total_steps.
inline double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_max, double lr_min) {
    if (total_steps <= 0) throw ShapeError("cosine_lr: total_steps must be positive");
    if (step < 0 || step > total_steps) throw ShapeError("cosine_lr: step outside [0, total_steps]");
    const double t = static_cast<double>(step) / static_cast<double>(total_steps);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(M_PI * t));
}

template <typename T>
struct AdamSlot {
    std::vector<T> m, v;
};

// Adam with decoupled slot state per parameter tensor.  Bias correction
// uses the shared step counter t.
template <typename T>
class Adam {
public:
    explicit Adam(double beta1 = 0.9, double beta2 = 0.9, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<Tensor<T>>& params, double lr) {
        if (slots_.empty()) {
            slots_.resize(params.size());
            for (std::size_t i = 0; i < params.size(); ++i) {
                slots_[i].m.assign(static_cast<std::size_t>(params[i].numel()), T(0));
                slots_[i].v.assign(static_cast<std::size_t>(params[i].numel()), T(0));
            }
        }
        if (slots_.size() != params.size()) throw ShapeError("adam: parameter list changed between steps");
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i];
            if (!p.has_grad()) continue;
            auto& g = p.grad();
            auto& m = slots_[i].m;
            auto& v = slots_[i].v;
            T* w = p.data();
            for (std::size_t k = 0; k < m.size(); ++k) {
                const double gk = static_cast<double>(g[k]);
                const double mk = beta1_ * static_cast<double>(m[k]) + (1.0 - beta1_) * gk;
                const double vk = beta2_ * static_cast<double>(v[k]) + (1.0 - beta2_) * gk * gk;
                m[k] = static_cast<T>(mk);
                v[k] = static_cast<T>(vk);
                const double mhat = mk / bc1;
                const double vhat = vk / bc2;
                w[k] = static_cast<T>(static_cast<double>(w[k]) - lr * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    std::int64_t step_count() const { return t_; }

private:
    double beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::vector<AdamSlot<T>> slots_;
};

template <typename T>
void zero_grads(std::vector<Tensor<T>>& params) {
    for (auto& p : params) p.zero_grad();
}

}  // namespace swinfsr
