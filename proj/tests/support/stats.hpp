// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "pixguide/diffusion/sampling.hpp"

namespace pixguide::testing {

struct Moments {
    std::vector<double> mean, var, mean_se, var_se;
};

// Per-element sample mean and variance of q_sample over n fresh noise draws,
// with standard errors from the fourth central moment.
template <class Rng>
Moments q_sample_moments(const Tensor<double>& x0, int t, const NoiseSchedule& s, int n, Rng& rng) {
    const std::size_t d = x0.size();
    std::vector<std::vector<double>> draws(d);
    for (int k = 0; k < n; ++k) {
        auto xt = q_sample(x0, t, randn<double>(x0.shape(), rng), s);
        for (std::size_t i = 0; i < d; ++i) draws[i].push_back(xt[i]);
    }
    Moments m;
    for (const auto& v : draws) {
        double mu = 0;
        for (double x : v) mu += x;
        mu /= n;
        double m2 = 0, m4 = 0;
        for (double x : v) {
            const double e = (x - mu) * (x - mu);
            m2 += e;
            m4 += e * e;
        }
        m2 /= n;
        m4 /= n;
        m.mean.push_back(mu);
        m.var.push_back(m2 * n / (n - 1));
        m.mean_se.push_back(std::sqrt(m2 / n));
        m.var_se.push_back(std::sqrt((m4 - m2 * m2) / n));
    }
    return m;
}

}  // namespace pixguide::testing
