// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "pixguide/diffusion/schedule.hpp"
#include "pixguide/tensor/tensor.hpp"

// Closed-form diffusion steps on plain image tensors. None of these record a
// graph; noise is always supplied by the caller so every step is reproducible.

namespace pixguide {

namespace detail {

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw Error(ErrorCode::shape_mismatch,
                    std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
}

/// out = ca * a + cb * b, computed in double and rounded once.
template <class T>
Tensor<T> axpby(double ca, const Tensor<T>& a, double cb, const Tensor<T>& b) {
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<T>(ca * static_cast<double>(a[i]) + cb * static_cast<double>(b[i]));
    return Tensor<T>(a.shape(), std::move(out));
}

}  // namespace detail

/// sqrt(abar) * x0 + sqrt(1 - abar) * eps for an arbitrary noise level.
template <class T>
Tensor<T> noise_to_level(const Tensor<T>& x0, double alpha_bar, const Tensor<T>& eps) {
    detail::require_same_shape(x0, eps, "noise_to_level");
    if (alpha_bar == 1.0) return x0.detach();
    return detail::axpby(std::sqrt(alpha_bar), x0, std::sqrt(1.0 - alpha_bar), eps);
}

/// Forward diffusion x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
template <class T>
Tensor<T> q_sample(const Tensor<T>& x0, int t, const Tensor<T>& eps, const NoiseSchedule& sched) {
    sched.check_range(t);
    return noise_to_level(x0, sched.alpha_bar(t), eps);
}

/// Predicted clean image (x_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t).
/// Accepts t = 0, where it is the identity on x_t.
template <class T>
Tensor<T> f_theta(const Tensor<T>& x_t, double alpha_bar_t, const Tensor<T>& eps_hat) {
    detail::require_same_shape(x_t, eps_hat, "f_theta");
    const double s = std::sqrt(alpha_bar_t);
    return detail::axpby(1.0 / s, x_t, -std::sqrt(1.0 - alpha_bar_t) / s, eps_hat);
}

template <class T>
Tensor<T> f_theta(const Tensor<T>& x_t, int t, const Tensor<T>& eps_hat, const NoiseSchedule& sched) {
    sched.check_range(t);
    return f_theta(x_t, sched.alpha_bar(t), eps_hat);
}

/// Mean of the stochastic reverse step for a jump with effective beta:
/// (x_t - beta / sqrt(1 - abar_t) * eps_hat) / sqrt(1 - beta).
template <class T>
Tensor<T> ddpm_mean(const Tensor<T>& x_t, const Tensor<T>& eps_hat, double beta, double alpha_bar_t) {
    detail::require_same_shape(x_t, eps_hat, "ddpm_mean");
    const double inv = 1.0 / std::sqrt(1.0 - beta);
    return detail::axpby(inv, x_t, -inv * beta / std::sqrt(1.0 - alpha_bar_t), eps_hat);
}

/// One ancestral DDPM step t -> t-1 on the base schedule. The injected noise
/// is zero at the terminal step t = 1.
template <class T>
Tensor<T> ddpm_step(const Tensor<T>& x_t, int t, const Tensor<T>& eps_hat, const Tensor<T>& noise,
                    const NoiseSchedule& sched) {
    sched.check_range(t);
    detail::require_same_shape(x_t, noise, "ddpm_step");
    auto mu = ddpm_mean(x_t, eps_hat, sched.beta(t), sched.alpha_bar(t));
    if (t == 1) return mu;
    return detail::axpby(1.0, mu, sched.sigma(t), noise);
}

/// Deterministic DDIM step t -> t_prev (t_prev may be 0, and may equal t).
template <class T>
Tensor<T> ddim_step(const Tensor<T>& x_t, int t, int t_prev, const Tensor<T>& eps_hat, const NoiseSchedule& sched) {
    sched.check_range(t);
    if (t_prev < 0 || t_prev > t)
        throw Error(ErrorCode::invalid_argument, "ddim_step: t_prev must lie in [0, t]");
    const double ab_prev = sched.alpha_bar(t_prev);
    auto x0_hat = f_theta(x_t, sched.alpha_bar(t), eps_hat);
    return detail::axpby(std::sqrt(ab_prev), x0_hat, std::sqrt(1.0 - ab_prev), eps_hat);
}

/// Deterministic DDIM inversion step t -> t_next > t (t may be 0).
template <class T>
Tensor<T> ddim_invert_step(const Tensor<T>& x_t, int t, int t_next, const Tensor<T>& eps_hat,
                           const NoiseSchedule& sched) {
    sched.check_range(t_next);
    if (t < 0 || t_next <= t) throw Error(ErrorCode::invalid_argument, "ddim_invert_step: t_next must exceed t");
    const double ab_next = sched.alpha_bar(t_next);
    auto x0_hat = f_theta(x_t, sched.alpha_bar(t), eps_hat);
    return detail::axpby(std::sqrt(ab_next), x0_hat, std::sqrt(1.0 - ab_next), eps_hat);
}

/// Standard normal tensor drawn from `rng`.
template <class T, class Rng>
Tensor<T> randn(const Shape& shape, Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<T> v(numel(shape));
    for (auto& x : v) x = static_cast<T>(n(rng));
    return Tensor<T>(shape, std::move(v));
}

}  // namespace pixguide
