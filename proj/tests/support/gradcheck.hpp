// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Central finite-difference oracle. Independent of the reverse-mode engine:
// it only evaluates the forward function on perturbed copies of the inputs.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "pixguide/tensor/autodiff.hpp"
#include "pixguide/tensor/ops.hpp"

namespace pixguide::testing {

using Fn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

inline Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                                    bool requires_grad = true) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(numel(shape));
    for (auto& x : v) x = u(rng);
    return Tensor<double>(std::move(shape), std::move(v), requires_grad);
}

/// Scalarizes an arbitrary-shaped output with fixed random weights so every
/// output element contributes to the checked gradient.
inline double project(const Tensor<double>& y, const std::vector<double>& w) {
    double acc = 0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * w[i];
    return acc;
}

struct GradCheckResult {
    double max_rel_error = 0;
};

/// Relative error ||analytic - numeric|| / max(||analytic||, ||numeric||, floor),
/// reported as the worst over all inputs.
inline GradCheckResult check_gradients(const Fn& f, const std::vector<Tensor<double>>& inputs, std::mt19937_64& rng,
                                       double h = 1e-6) {
    auto y = f(inputs);
    std::vector<double> w(y.size());
    std::normal_distribution<double> n(0, 1);
    for (auto& x : w) x = n(rng);
    auto loss = sum(mul(y, Tensor<double>(y.shape(), w)));
    std::vector<Tensor<double>> wrt;
    for (const auto& t : inputs)
        if (t.requires_grad()) wrt.push_back(t);
    auto analytic = gradients(loss, wrt);

    GradCheckResult result;
    std::size_t k = 0;
    for (std::size_t idx = 0; idx < inputs.size(); ++idx) {
        if (!inputs[idx].requires_grad()) continue;
        std::vector<double> numeric(inputs[idx].size());
        for (std::size_t i = 0; i < inputs[idx].size(); ++i) {
            auto perturbed = [&](double delta) {
                std::vector<Tensor<double>> copy;
                for (std::size_t j = 0; j < inputs.size(); ++j) {
                    if (j != idx) {
                        copy.push_back(inputs[j].detach());
                        continue;
                    }
                    auto v = inputs[j].to_vector();
                    v[i] += delta;
                    copy.emplace_back(inputs[j].shape(), std::move(v));
                }
                return project(f(copy), w);
            };
            numeric[i] = (perturbed(h) - perturbed(-h)) / (2 * h);
        }
        double diff = 0, na = 0, nn = 0;
        for (std::size_t i = 0; i < numeric.size(); ++i) {
            const double a = analytic[k][i];
            diff += (a - numeric[i]) * (a - numeric[i]);
            na += a * a;
            nn += numeric[i] * numeric[i];
        }
        const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-8});
        result.max_rel_error = std::max(result.max_rel_error, std::sqrt(diff) / denom);
        ++k;
    }
    return result;
}

}  // namespace pixguide::testing
