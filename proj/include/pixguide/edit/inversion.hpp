// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pixguide/diffusion/sampling.hpp"
#include "pixguide/net/model.hpp"

namespace pixguide {

namespace detail {

/// [3,S,S] or [1,3,S,S] -> [1,3,S,S].
template <class T>
Tensor<T> as_batch1(const Tensor<T>& x) {
    if (x.rank() == 4) {
        PIXGUIDE_CHECK(x.dim(0) == 1, shape_mismatch, "expected a single image, got " + to_string(x.shape()));
        return x.detach();
    }
    PIXGUIDE_CHECK(x.rank() == 3, shape_mismatch, "expected an image [C,H,W], got " + to_string(x.shape()));
    return reshape(x.detach(), Shape{1, x.dim(0), x.dim(1), x.dim(2)});
}

/// [1,3,S,S] -> [3,S,S].
template <class T>
Tensor<T> as_image(const Tensor<T>& x) {
    return reshape(x.detach(), Shape{x.dim(1), x.dim(2), x.dim(3)});
}

}  // namespace detail

/// DDIM-invert x0 [1,3,S,S] along the grid up to its last step. The first
/// jump from t=0 evaluates eps at the first grid step.
template <class T>
Tensor<T> ddim_invert(const DiffusionModel<T>& model, const Tensor<T>& x0, const RespacedSchedule& grid) {
    auto x = x0.detach();
    for (std::size_t i = 0; i < grid.steps().size(); ++i) {
        const int from = grid.prev(i), to = grid.steps()[i];
        const auto eps = model.eps(x, from == 0 ? to : from);
        x = ddim_invert_step(x, from, to, eps, model.sched);
    }
    return x;
}

/// Deterministic DDIM reverse from the grid's last step down to t=0.
template <class T>
Tensor<T> ddim_generate(const DiffusionModel<T>& model, const Tensor<T>& x_t0, const RespacedSchedule& grid) {
    auto x = x_t0.detach();
    for (std::size_t i = grid.steps().size(); i-- > 0;) {
        const int t = grid.steps()[i];
        x = ddim_step(x, t, grid.prev(i), model.eps(x, t), model.sched);
    }
    return x;
}

/// Invert x [3,S,S] to t0 and come back; returns [3,S,S].
template <class T>
Tensor<T> ddim_reconstruct(const DiffusionModel<T>& model, const Tensor<T>& x, int t0, int n_steps) {
    const auto grid = respace(model.sched, n_steps, t0);
    return detail::as_image(ddim_generate(model, ddim_invert(model, detail::as_batch1(x), grid), grid));
}

/// Linear interpolation of DDIM latents at t0, reconstructed at n evenly
/// spaced coefficients lambda_k = k / (n - 1).
template <class T>
std::vector<Tensor<T>> interpolate_latents(const Tensor<T>& xa, const Tensor<T>& xb, int t0, int n,
                                           const DiffusionModel<T>& model, int n_steps = 50) {
    PIXGUIDE_CHECK(xa.shape() == xb.shape(), shape_mismatch, "interpolate: image shapes differ");
    PIXGUIDE_CHECK(n >= 2, invalid_argument, "interpolate: need n >= 2");
    const auto grid = respace(model.sched, n_steps, t0);
    const auto za = ddim_invert(model, detail::as_batch1(xa), grid);
    const auto zb = ddim_invert(model, detail::as_batch1(xb), grid);
    std::vector<Tensor<T>> out;
    for (int k = 0; k < n; ++k) {
        const double lam = static_cast<double>(k) / static_cast<double>(n - 1);
        out.push_back(detail::as_image(ddim_generate(model, detail::axpby(1.0 - lam, za, lam, zb), grid)));
    }
    return out;
}

}  // namespace pixguide
