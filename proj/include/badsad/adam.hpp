#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "badsad/autograd.hpp"
#include "badsad/errors.hpp"

namespace badsad {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Adam with bias correction and decoupled weight decay. The decay step
// carries the l2 regularization term of the detection objective, so it is
// applied after the moment update: value *= (1 - lr*weight_decay).
template <typename T>
class Adam {
  public:
    Adam(AdamConfig cfg, std::vector<NodePtr<T>> params)
        : cfg_(cfg), params_(std::move(params)) {
        if (!(cfg_.lr > 0.0)) throw ConfigError("adam: lr must be > 0");
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (const auto& p : params_) {
            m_.emplace_back(p->value.shape);
            v_.emplace_back(p->value.shape);
        }
    }

    // One update from the currently accumulated grads; grads are zeroed after.
    void step() {
        ++t_;
        const T b1 = static_cast<T>(cfg_.beta1);
        const T b2 = static_cast<T>(cfg_.beta2);
        const T lr = static_cast<T>(cfg_.lr);
        const T eps = static_cast<T>(cfg_.eps);
        const T corr1 = T(1) - static_cast<T>(std::pow(cfg_.beta1, static_cast<double>(t_)));
        const T corr2 = T(1) - static_cast<T>(std::pow(cfg_.beta2, static_cast<double>(t_)));
        const T decay = T(1) - lr * static_cast<T>(cfg_.weight_decay);
        for (std::size_t pi = 0; pi < params_.size(); ++pi) {
            auto& p = *params_[pi];
            auto& m = m_[pi];
            auto& v = v_[pi];
            for (std::size_t i = 0; i < p.value.numel(); ++i) {
                const T g = p.grad[i];
                m[i] = b1 * m[i] + (T(1) - b1) * g;
                v[i] = b2 * v[i] + (T(1) - b2) * g * g;
                const T mhat = m[i] / corr1;
                const T vhat = v[i] / corr2;
                p.value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
                p.value[i] *= decay;
            }
            p.zero_grad();
        }
    }

    std::uint64_t steps_taken() const { return t_; }

  private:
    AdamConfig cfg_;
    std::vector<NodePtr<T>> params_;
    std::vector<Tensor<T>> m_, v_;
    std::uint64_t t_ = 0;
};

}  // namespace badsad
