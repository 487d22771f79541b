// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <random>
#include <thread>
#include <type_traits>

#include "pixguide/edit/accuracy.hpp"
#include "pixguide/edit/inversion.hpp"
#include "pixguide/edit/loss.hpp"
#include "pixguide/edit/params.hpp"
#include "pixguide/tensor/autodiff.hpp"

namespace pixguide {

struct GuidanceOptions {
    bool literal_sign = false;      // shift the mean by +s*Sigma*grad instead of -s*Sigma*grad
    bool background_alpha_t = false;  // noise the background to t instead of t-1
    unsigned threads = 0;           // 0: one per core, capped at the batch
    std::uint64_t eval_seed = kEvalSeed;
};

struct TracePoint {
    int t = 0;
    double snr = 0;
    double accuracy = 0;
};

struct CandidateMetrics {
    double mae_outside = std::numeric_limits<double>::quiet_NaN();
    double psnr_outside = std::numeric_limits<double>::quiet_NaN();
    double accuracy_inside = std::numeric_limits<double>::quiet_NaN();
};

template <class T>
struct Candidate {
    Tensor<T> image;  // [3,S,S]
    CandidateMetrics metrics;
    std::vector<TracePoint> trace;  // descending t
    bool failed = false;
    std::string error;
};

template <class T>
struct EditResult {
    std::vector<Candidate<T>> candidates;
    GuidanceParams params;
};

/// One (candidate, step) progress event. `x0_pred` is the current clean
/// estimate, valid only during the callback.
template <class T>
struct StepEvent {
    std::size_t candidate = 0;
    std::size_t step = 0;  // 0 at t0
    std::size_t n_steps = 0;
    int t = 0;
    double snr = 0;
    double accuracy = 0;
    double loss = 0;
    const Tensor<T>* x0_pred = nullptr;
};

/// Called from worker threads; must be thread-safe and tolerate
/// interleaving across candidates.
template <class T>
using EditObserver = std::function<void(const StepEvent<T>&)>;

namespace detail {

/// Per-candidate noise stream.
inline std::mt19937_64 candidate_rng(std::uint64_t seed, std::size_t b) { return std::mt19937_64(scene_seed(seed, b)); }

/// m ? fg : bg, broadcast over channels.
template <class T>
Tensor<T> blend(const Tensor<T>& fg, const Tensor<T>& bg, const RoiMask& m) {
    require_same_shape(fg, bg, "blend");
    const std::size_t plane = m.height * m.width;
    PIXGUIDE_CHECK(plane > 0 && fg.size() % plane == 0, shape_mismatch, "blend: mask does not match image");
    std::vector<T> out(fg.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = m.bits[i % plane] ? fg[i] : bg[i];
    return Tensor<T>(fg.shape(), std::move(out));
}

/// Fraction of ROI pixels where G(features) equals y_edited.
template <class T>
double roi_accuracy(const PixelClassifier<T>& g, const Tensor<T>& features, const SegMap& y_edited, const RoiMask& m) {
    auto idx = roi_pixels(m);
    const auto pred = argmax_rows(g.logits(gather_rows(pixel_rows(features.detach()), idx)));
    std::size_t hit = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) hit += pred[k] == y_edited.labels[idx[k]];
    return static_cast<double>(hit) / static_cast<double>(idx.size());
}

/// Reverse-step noise scale; zero at the terminal step.
inline double step_sigma(const RespacedSchedule& grid, std::size_t i) {
    return i == 0 ? 0.0 : std::sqrt(grid.variance(i));
}

/// Background x0 noised to the level the blended state should carry.
template <class T>
Tensor<T> background(const Tensor<T>& x0, const RespacedSchedule& grid, std::size_t i, bool alpha_t,
                     const Tensor<T>& eps) {
    const int level = alpha_t ? grid.steps()[i] : grid.prev(i);
    return noise_to_level(x0, grid.alpha_bar(level), eps);
}

/// Runs fn(b) for b in [0, n) on up to `threads` workers.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t w = std::min<std::size_t>(threads, n);
    if (w <= 1) {
        for (std::size_t b = 0; b < n; ++b) fn(b);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < w; ++k)
        pool.emplace_back([&] {
            for (std::size_t b; (b = next++) < n;) {
                try {
                    fn(b);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!first) first = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (first) std::rethrow_exception(first);
}

}  // namespace detail

/// Plain blended sampler: stochastic reverse diffusion from the DDIM latent
/// of x, with the noised original pasted outside m at every step. Uses the
/// same per-candidate noise streams as guided_sample.
template <class T>
std::vector<Tensor<T>> blended_sample(const Tensor<T>& x, const RoiMask& m, const GuidanceParams& params,
                                      const DiffusionModel<T>& model, const GuidanceOptions& opt = {}) {
    params.validate(model.sched.steps());
    const auto x0 = detail::as_batch1(x);
    const auto grid = respace(model.sched, params.n_steps, params.t0);
    const auto latent = ddim_invert(model, x0, grid);
    std::vector<Tensor<T>> out(static_cast<std::size_t>(params.batch));
    detail::parallel_for(out.size(), opt.threads, [&](std::size_t b) {
        auto rng = detail::candidate_rng(params.seed, b);
        auto xt = latent;
        for (std::size_t i = grid.steps().size(); i-- > 0;) {
            const int t = grid.steps()[i];
            const auto z = randn<T>(x0.shape(), rng);
            const auto e_bg = randn<T>(x0.shape(), rng);
            const auto mu = ddpm_mean(xt, model.eps(xt, t), grid.beta(i), grid.alpha_bar(t));
            const auto fg = detail::axpby(1.0, mu, detail::step_sigma(grid, i), z);
            xt = detail::blend(fg, detail::background(x0, grid, i, opt.background_alpha_t, e_bg), m);
        }
        out[b] = detail::as_image(xt);
    });
    return out;
}

/// Guided editing: invert x to t0, then run the blended reverse process with
/// the foreground mean shifted down the masked segmentation loss of G_t.
/// Metrics are filled when the bank has a multi-step classifier.
template <class T>
EditResult<T> guided_sample(const Tensor<T>& x, const SegMap& y_edited, const RoiMask& m, const GuidanceParams& params,
                            const DiffusionModel<T>& model, const ClassifierBank<T>& bank,
                            const GuidanceOptions& opt = {},
                            const std::type_identity_t<EditObserver<T>>& observer = {}) {
    params.validate(model.sched.steps());
    PIXGUIDE_CHECK(m.count() > 0, empty_roi, "guided_sample: empty ROI");
    const auto x0 = detail::as_batch1(x);
    PIXGUIDE_CHECK(m.height == x0.dim(2) && m.width == x0.dim(3) && y_edited.height == m.height &&
                       y_edited.width == m.width,
                   shape_mismatch, "guided_sample: image, map and mask sizes differ");
    const auto grid = respace(model.sched, params.n_steps, params.t0);
    const auto latent = ddim_invert(model, x0, grid);
    const auto& cfg = model.config();
    const double sign = opt.literal_sign ? 1.0 : -1.0;

    EditResult<T> res;
    res.params = params;
    res.candidates.resize(static_cast<std::size_t>(params.batch));
    detail::parallel_for(res.candidates.size(), opt.threads, [&](std::size_t b) {
        auto& cand = res.candidates[b];
        auto rng = detail::candidate_rng(params.seed, b);
        auto xt = latent;
        try {
            for (std::size_t i = grid.steps().size(); i-- > 0;) {
                const int t = grid.steps()[i];
                const auto z = randn<T>(x0.shape(), rng);
                const auto e_bg = randn<T>(x0.shape(), rng);
                const auto& g = bank.resolve(t);

                auto xin = xt.detach(params.s > 0);
                const auto out = model.forward(xin, t);
                const auto feats = extract_pixel_features(out.decoder, cfg);
                const auto eps = out.eps.detach();
                auto mu = ddpm_mean(xt, eps, grid.beta(i), grid.alpha_bar(t));
                double loss_v = std::numeric_limits<double>::quiet_NaN();
                const double var = i == 0 ? 0.0 : grid.variance(i);
                if (params.s > 0) {
                    const auto loss = seg_loss(feats, y_edited, m, g);
                    loss_v = static_cast<double>(loss[0]);
                    const auto grad = gradient(loss, xin);
                    for (const T v : grad.values())
                        PIXGUIDE_CHECK(std::isfinite(static_cast<double>(v)), non_finite,
                                       "non-finite guidance gradient at t=" + std::to_string(t));
                    if (var > 0) mu = detail::axpby(1.0, mu, sign * params.s * var, grad);
                }
                const double acc = detail::roi_accuracy(g, feats, y_edited, m);
                cand.trace.push_back({t, model.sched.snr(t), acc});
                if (observer) {
                    const auto x0_pred = f_theta(xt, grid.alpha_bar(t), eps);
                    observer({b, grid.steps().size() - 1 - i, grid.steps().size(), t, model.sched.snr(t), acc, loss_v,
                              &x0_pred});
                }
                const auto fg = detail::axpby(1.0, mu, detail::step_sigma(grid, i), z);
                xt = detail::blend(fg, detail::background(x0, grid, i, opt.background_alpha_t, e_bg), m);
            }
            cand.image = detail::as_image(xt);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::non_finite) throw;
            cand.failed = true;
            cand.error = e.what();
        }
    });

    const auto img = detail::as_image(x0);
    for (auto& cand : res.candidates) {
        if (cand.failed) continue;
        if (m.count() < m.size()) {
            cand.metrics.mae_outside = mae_outside(img, cand.image, m);
            cand.metrics.psnr_outside = psnr_outside(img, cand.image, m);
        }
        if (bank.multi)
            cand.metrics.accuracy_inside = accuracy_inside(cand.image, y_edited, m, model, bank, opt.eval_seed);
    }
    return res;
}

}  // namespace pixguide
