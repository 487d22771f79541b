// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "pixguide/tensor/tensor.hpp"

namespace pixguide {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias-corrected first and second moments. Holds the parameter
/// handles and updates their leaf values in place.
template <class T>
class Adam {
public:
    Adam(std::vector<Tensor<T>> params, AdamConfig cfg = {}) : params_(std::move(params)), cfg_(cfg) {
        for (const auto& p : params_) {
            m_.emplace_back(p.size(), 0.0);
            v_.emplace_back(p.size(), 0.0);
        }
    }

    void step(const std::vector<Tensor<T>>& grads) {
        PIXGUIDE_CHECK(grads.size() == params_.size(), shape_mismatch, "Adam: gradient count differs from params");
        for (std::size_t k = 0; k < grads.size(); ++k)
            PIXGUIDE_CHECK(grads[k].shape() == params_[k].shape(), shape_mismatch,
                           "Adam: gradient shape " + to_string(grads[k].shape()) + " differs from param " +
                               to_string(params_[k].shape()));
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto w = params_[k].mutable_values();
            auto g = grads[k].values();
            auto& m = m_[k];
            auto& v = v_[k];
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double gi = g[i];
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
                const double update = cfg_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
                w[i] = static_cast<T>(w[i] - update);
            }
        }
    }

    std::size_t steps_taken() const { return t_; }
    const AdamConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }

private:
    std::vector<Tensor<T>> params_;
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    std::size_t t_ = 0;
};

}  // namespace pixguide
