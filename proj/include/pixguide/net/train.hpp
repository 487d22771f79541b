// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <random>

#include "pixguide/diffusion/sampling.hpp"
#include "pixguide/net/model.hpp"
#include "pixguide/tensor/adam.hpp"
#include "pixguide/tensor/autodiff.hpp"

namespace pixguide {

struct DdpmTrainConfig {
    int steps = 3000;
    std::size_t batch = 8;
    AdamConfig adam{.lr = 1e-3};
    int warmup = 100;
    double grad_clip = 1.0;
    std::uint64_t seed = 0;
    std::uint64_t init_seed = 0;

    nlohmann::json to_json() const {
        return {{"steps", steps}, {"batch", batch},         {"lr", adam.lr}, {"warmup", warmup},
                {"grad_clip", grad_clip}, {"seed", seed}, {"init_seed", init_seed}};
    }
};

template <class T>
struct DdpmTrainResult {
    DiffusionModel<T> model;
    std::vector<double> losses;
};

/// Called after every optimizer step with (step, loss).
using TrainObserver = std::function<void(int, double)>;

namespace detail {

template <class T>
Tensor<T> stack_images(const std::vector<Tensor<T>>& images, const std::vector<std::size_t>& idx) {
    const Shape& s = images.at(idx.at(0)).shape();
    const std::size_t per = numel(s);
    std::vector<T> out;
    out.reserve(per * idx.size());
    for (auto i : idx) {
        PIXGUIDE_CHECK(images[i].shape() == s, shape_mismatch, "training images differ in shape");
        out.insert(out.end(), images[i].values().begin(), images[i].values().end());
    }
    return Tensor<T>(Shape{idx.size(), s[0], s[1], s[2]}, std::move(out));
}

template <class T>
double clip_global_norm(std::vector<Tensor<T>>& grads, double max_norm) {
    long double sq = 0;
    for (const auto& g : grads)
        for (T v : g.values()) sq += static_cast<long double>(v) * v;
    const double norm = std::sqrt(static_cast<double>(sq));
    if (max_norm > 0 && norm > max_norm) {
        const T f = static_cast<T>(max_norm / norm);
        for (auto& g : grads) g = scale(g, f);
    }
    return norm;
}

}  // namespace detail

/// Standard noise-prediction objective: mse(eps, eps_theta(q_sample(x0, t, eps), t))
/// with t uniform on [1, T]. Images are [C, S, S] in [-1, 1].
template <class T>
DdpmTrainResult<T> train_ddpm(const std::vector<Tensor<T>>& images, const UNetConfig& cfg, const NoiseSchedule& sched,
                              const DdpmTrainConfig& tc, const TrainObserver& observer = {}) {
    PIXGUIDE_CHECK(!images.empty(), empty_dataset, "train_ddpm: dataset is empty");
    PIXGUIDE_CHECK(tc.steps >= 0 && tc.batch >= 1, invalid_argument, "train_ddpm: bad step or batch count");
    UNet<T> net(cfg, tc.init_seed);
    net.set_trainable(true);
    auto params = net.parameters();
    Adam<T> opt(params, tc.adam);
    std::mt19937_64 rng(tc.seed);
    std::uniform_int_distribution<std::size_t> pick(0, images.size() - 1);
    std::uniform_int_distribution<int> pick_t(1, sched.steps());
    std::vector<double> losses;
    for (int step = 0; step < tc.steps; ++step) {
        std::vector<std::size_t> idx(tc.batch);
        std::vector<int> ts(tc.batch);
        for (auto& i : idx) i = pick(rng);
        for (auto& t : ts) t = pick_t(rng);
        auto x0 = detail::stack_images(images, idx);
        auto eps = randn<T>(x0.shape(), rng);
        std::vector<T> xt(x0.size());
        const std::size_t per = x0.size() / tc.batch;
        for (std::size_t b = 0; b < tc.batch; ++b) {
            const double ab = sched.alpha_bar(ts[b]);
            const double sa = std::sqrt(ab), sb = std::sqrt(1.0 - ab);
            for (std::size_t i = b * per; i < (b + 1) * per; ++i) xt[i] = static_cast<T>(sa * x0[i] + sb * eps[i]);
        }
        double loss_value = std::numeric_limits<double>::quiet_NaN();
        try {
            auto loss = mse(net.forward(Tensor<T>(x0.shape(), std::move(xt)), ts).eps, eps);
            loss_value = loss.item();
            auto grads = gradients(loss, params);
            detail::clip_global_norm(grads, tc.grad_clip);
            if (tc.warmup > 0) opt.set_lr(tc.adam.lr * std::min(1.0, (step + 1.0) / tc.warmup));
            opt.step(grads);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::non_finite) throw;
        }
        if (!std::isfinite(loss_value) || !std::all_of(params.begin(), params.end(), [](const Tensor<T>& p) {
                return std::all_of(p.values().begin(), p.values().end(), [](T v) { return std::isfinite(v); });
            }))
            throw Error(ErrorCode::divergence, "train_ddpm: loss diverged at step " + std::to_string(step) +
                                                   (losses.empty() ? std::string()
                                                                   : " (last finite loss " +
                                                                         std::to_string(losses.back()) + ")"));
        losses.push_back(loss_value);
        if (observer) observer(step, loss_value);
    }
    net.set_trainable(false);
    return {DiffusionModel<T>{std::move(net), sched}, std::move(losses)};
}

}  // namespace pixguide
