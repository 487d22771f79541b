// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <mutex>
#include <set>

#include "pixguide/edit/result.hpp"
#include "pixguide/edit/roi.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"
#include "support/tiny.hpp"

using namespace pixguide;
using namespace pixguide::testing;
using TD = Tensor<double>;

namespace {

SegMap constant_map(std::size_t h, std::size_t w, int v, std::size_t k) {
    return SegMap(h, w, std::vector<int>(h * w, v), palette(k));
}

TD random_image(std::size_t size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> v(3 * size * size);
    for (auto& x : v) x = u(rng);
    return TD({3, size, size}, v);
}

/// Mask with the given rectangle set (both core and dilated bits).
RoiMask rect_mask(std::size_t size, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
    auto m = RoiMask::filled(size, size, false);
    for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) m.bits[r * size + c] = m.core[r * size + c] = 1;
    return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// ROI mask

TEST(RoiMask, NoOpEditWithAbsentClassesIsEmpty) {
    auto y = constant_map(10, 10, 0, 3);
    auto m = build_roi_mask(y, y, {2});
    EXPECT_EQ(m.count(), 0u);
    EXPECT_EQ(m.core_count(), 0u);
}

TEST(RoiMask, SinglePixelGrowsToSevenBySeven) {
    auto y = constant_map(20, 20, 0, 3);
    auto ye = y;
    ye.at(10, 10) = 1;
    auto m = build_roi_mask(y, ye, {1});
    EXPECT_EQ(m.core_count(), 1u);
    EXPECT_EQ(m.count(), 49u);
    for (std::size_t r = 0; r < 20; ++r)
        for (std::size_t c = 0; c < 20; ++c)
            EXPECT_EQ(m(r, c), r >= 7 && r <= 13 && c >= 7 && c <= 13) << r << "," << c;
}

TEST(RoiMask, ClipsAtBorders) {
    auto y = constant_map(20, 20, 0, 3);
    y.at(0, 0) = 2;
    auto m = build_roi_mask(y, y, {2});
    EXPECT_EQ(m.count(), 16u);
    y.at(0, 0) = 0;
    y.at(19, 10) = 2;
    EXPECT_EQ(build_roi_mask(y, y, {2}).count(), 28u);
}

TEST(RoiMask, MatchesBruteForceOnRandomPairs) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> sz(1, 24);
    std::uniform_int_distribution<int> kdist(2, 6), dil(0, 4);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t h = sz(rng), w = sz(rng), k = static_cast<std::size_t>(kdist(rng));
        auto y = random_map(h, w, k, rng), ye = random_map(h, w, k, rng);
        std::vector<int> q;
        for (int c = 0; c < static_cast<int>(k); ++c)
            if (rng() % 3 == 0) q.push_back(c);
        if (q.empty()) q.push_back(static_cast<int>(rng() % k));
        const int r = trial % 2 ? 3 : dil(rng);
        auto m = build_roi_mask(y, ye, q, r);
        ASSERT_EQ(m.bits, brute_mask(y, ye, q, r)) << "trial " << trial;
        ASSERT_EQ(m.core, brute_mask(y, ye, q, 0)) << "trial " << trial;
    }
}

TEST(RoiMask, DilationOnlyAddsAndLargerQNeverShrinks) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        auto y = random_map(12, 12, 6, rng), ye = random_map(12, 12, 6, rng);
        for (auto& v : y.labels) v = v < 4 ? 0 : v;
        for (auto& v : ye.labels) v = v < 4 ? 0 : v;
        auto a = build_roi_mask(y, ye, {4});
        auto b = build_roi_mask(y, ye, {4, 5});
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_LE(a.core[i], a.bits[i]);
            EXPECT_LE(a.bits[i], b.bits[i]);
        }
    }
}

TEST(RoiMask, Errors) {
    auto y = constant_map(4, 4, 0, 2), z = constant_map(4, 5, 0, 2);
    EXPECT_THROW(build_roi_mask(y, z, {1}), Error);
    EXPECT_THROW(build_roi_mask(y, y, {}), Error);
}

TEST(RoiMask, ChangedClasses) {
    auto y = constant_map(4, 4, 0, 4);
    auto ye = y;
    ye.at(1, 1) = 3;
    EXPECT_EQ(changed_classes(y, ye), (std::vector<int>{0, 3}));
    EXPECT_TRUE(changed_classes(y, y).empty());
}

// ---------------------------------------------------------------------------
// Segmentation loss

TEST(SegLoss, MatchesBruteForceMaskedMean) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t d = 6, k = 4, h = 5, w = 7;
        PixelClassifier<double> g(d, {9, 5}, k, rng());
        auto f = randn<double>({1, d, h, w}, rng);
        auto ye = random_map(h, w, k, rng);
        auto m = RoiMask::filled(h, w, false);
        for (auto& b : m.bits) b = rng() % 2;
        m.bits[rng() % m.size()] = 1;
        const double got = seg_loss(f, ye, m, g)[0];
        // Per-pixel CE over the full map, then restricted to the mask.
        const auto all = g.logits(pixel_rows(f));
        double acc = 0;
        std::size_t n = 0;
        for (std::size_t p = 0; p < h * w; ++p) {
            if (!m.bits[p]) continue;
            std::vector<double> row(all.values().begin() + static_cast<long>(p * k),
                                    all.values().begin() + static_cast<long>((p + 1) * k));
            acc += brute_ce(TD({1, k}, row), {ye.labels[p]});
            ++n;
        }
        EXPECT_LT(std::abs(got - acc / static_cast<double>(n)), 1e-10);
    }
}

TEST(SegLoss, UniformLogitsGiveLogK) {
    for (std::size_t k : {2u, 3u, 6u, 7u}) {
        const std::size_t d = 4;
        PixelClassifier<double> g({TD::zeros({5, d}), TD::zeros({5}), TD::zeros({5, 5}), TD::zeros({5}),
                                   TD::zeros({k, 5}), TD::zeros({k})});
        std::mt19937_64 rng(k);
        auto f = randn<double>({1, d, 6, 6}, rng);
        auto ye = random_map(6, 6, k, rng);
        auto m = RoiMask::filled(6, 6, false);
        for (std::size_t i = 0; i < m.size(); i += 1 + k % 3) m.bits[i] = 1;
        EXPECT_EQ(seg_loss(f, ye, m, g)[0], std::log(static_cast<double>(k)));
    }
}

TEST(SegLoss, CertainCorrectClassifierGivesZero) {
    // Logits = 1000 * (one-hot of the first feature channel argmax pattern).
    const std::size_t k = 3;
    std::vector<double> w3(k * 3, 0);
    for (std::size_t i = 0; i < k; ++i) w3[i * 3 + i] = 1000;
    std::vector<double> eye(9, 0);
    for (std::size_t i = 0; i < 3; ++i) eye[i * 3 + i] = 1;
    PixelClassifier<double> g({TD({3, 3}, eye), TD::zeros({3}), TD({3, 3}, eye), TD::zeros({3}), TD({k, 3}, w3),
                               TD::zeros({k})});
    std::mt19937_64 rng(1);
    auto ye = random_map(4, 4, k, rng);
    std::vector<double> f(3 * 16, 0);
    for (std::size_t p = 0; p < 16; ++p) f[static_cast<std::size_t>(ye.labels[p]) * 16 + p] = 1;
    EXPECT_EQ(seg_loss(TD({1, 3, 4, 4}, f), ye, RoiMask::filled(4, 4, true), g)[0], 0.0);
}

TEST(SegLoss, EmptyRoiAndShapeErrors) {
    PixelClassifier<double> g(4, {5, 5}, 3, 1);
    std::mt19937_64 rng(1);
    auto f = randn<double>({1, 4, 3, 3}, rng);
    auto ye = random_map(3, 3, 3, rng);
    try {
        seg_loss(f, ye, RoiMask::filled(3, 3, false), g);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::empty_roi);
    }
    EXPECT_THROW(seg_loss(f, ye, RoiMask::filled(3, 4, true), g), Error);
}

TEST(SegLoss, GradientToFeaturesMatchesFiniteDifferences) {
    std::mt19937_64 rng(8);
    PixelClassifier<double> g(4, {6, 5}, 3, 2);
    auto f = random_tensor({1, 4, 3, 3}, rng);
    auto ye = random_map(3, 3, 3, rng);
    auto m = RoiMask::filled(3, 3, false);
    m.bits = {1, 0, 1, 1, 0, 0, 1, 1, 0};
    Fn fn = [&](const std::vector<TD>& in) { return seg_loss(in[0], ye, m, g); };
    EXPECT_LT(check_gradients(fn, {f}, rng).max_rel_error, 1e-6);
}

// ---------------------------------------------------------------------------
// Parameters

TEST(SelectParams, Faces256Examples) {
    const auto policy = ParamPolicy::faces256();
    auto m = RoiMask::filled(256, 256, false);
    for (std::size_t i = 0; i < 4000; ++i) m.core[i * 7] = m.bits[i * 7] = 1;
    auto p = select_params(m, policy);
    EXPECT_EQ(p.t0, 500);
    EXPECT_EQ(p.s, 100.0);
    for (std::size_t i = 0; i < 6000; ++i) m.core[i * 7] = m.bits[i * 7] = 1;
    p = select_params(m, policy);
    EXPECT_EQ(p.t0, 750);
    EXPECT_EQ(p.s, 40.0);
    EXPECT_EQ(p.n_steps, 50);
}

TEST(SelectParams, ThresholdScalesWithImageArea) {
    EXPECT_DOUBLE_EQ(ParamPolicy::faces256().threshold_at(32), 5000.0 * (32.0 / 256.0) * (32.0 / 256.0));
    EXPECT_DOUBLE_EQ(ParamPolicy::faces256().threshold_at(256), 5000.0);
    auto fixed = ParamPolicy::faces256();
    fixed.scale_threshold = false;
    EXPECT_EQ(fixed.threshold_at(32), 5000.0);

    const auto policy = ParamPolicy::toy();
    auto m = RoiMask::filled(32, 32, false);
    for (std::size_t i = 0; i < 78; ++i) m.core[i] = 1;
    m.bits = std::vector<std::uint8_t>(m.size(), 1);  // dilation does not count
    EXPECT_EQ(select_params(m, policy).t0, policy.small.t0);
    m.core[78] = 1;
    EXPECT_EQ(select_params(m, policy).t0, policy.large.t0);
}

TEST(SelectParams, PolicyJsonRoundTrip) {
    auto p = ParamPolicy::toy();
    p.small = {321, 7.5};
    p.threshold = 1234;
    auto q = ParamPolicy::from_json(p.to_json());
    EXPECT_EQ(q.small.t0, 321);
    EXPECT_EQ(q.small.s, 7.5);
    EXPECT_EQ(q.threshold, 1234);
    EXPECT_EQ(q.large.t0, p.large.t0);
}

TEST(GuidanceParams, Validation) {
    GuidanceParams p{100, 1.0, 10, 2, 0};
    EXPECT_NO_THROW(p.validate(100));
    auto bad = p;
    bad.n_steps = 101;
    bad.t0 = 100;
    EXPECT_THROW(bad.validate(1000), Error);
    bad = p;
    bad.t0 = 200;
    EXPECT_THROW(bad.validate(100), Error);
    bad = p;
    bad.s = -1;
    EXPECT_THROW(bad.validate(100), Error);
    bad = p;
    bad.batch = 0;
    EXPECT_THROW(bad.validate(100), Error);
    bad = p;
    bad.n_steps = 0;
    EXPECT_THROW(bad.validate(100), Error);
    EXPECT_EQ(GuidanceParams::from_json(p.to_json()), p);
}

// ---------------------------------------------------------------------------
// Samplers

class Sampler : public ::testing::Test {
protected:
    DiffusionModel<double> model = tiny_model(8, 100);
    ClassifierBank<double> bank = tiny_bank(model, 4);
    TD x = random_image(8, 1);
    SegMap ye = [] {
        std::mt19937_64 rng(2);
        return random_map(8, 8, 4, rng);
    }();
    RoiMask m = rect_mask(8, 2, 5, 1, 6);
    GuidanceParams params{60, 5.0, 6, 3, 42};
};

TEST_F(Sampler, ZeroScaleEqualsPlainBlendedSamplerBitwise) {
    auto p = params;
    p.s = 0;
    auto guided = guided_sample(x, ye, m, p, model, bank);
    auto plain = blended_sample(x, m, p, model);
    ASSERT_EQ(plain.size(), 3u);
    for (std::size_t b = 0; b < plain.size(); ++b) EXPECT_EQ(guided.candidates[b].image.to_vector(), plain[b].to_vector());
}

TEST_F(Sampler, BackgroundIsExactlyPreserved) {
    for (double s : {0.0, 5.0, 1e3}) {
        auto p = params;
        p.s = s;
        auto r = guided_sample(x, ye, m, p, model, bank);
        for (const auto& c : r.candidates) {
            ASSERT_FALSE(c.failed);
            for (std::size_t i = 0; i < x.size(); ++i)
                if (!m.bits[i % 64]) {
                    ASSERT_EQ(c.image[i], x[i]);
                }
            EXPECT_EQ(c.metrics.mae_outside, 0.0);
            EXPECT_EQ(c.metrics.psnr_outside, kPsnrCap);
        }
    }
}

TEST_F(Sampler, LiteralBackgroundLevelLeavesTerminalNoise) {
    GuidanceOptions opt;
    opt.background_alpha_t = true;
    auto r = guided_sample(x, ye, m, params, model, bank, opt);
    EXPECT_GT(r.candidates[0].metrics.mae_outside, 0.0);
}

TEST_F(Sampler, GuidanceChangesOnlyTheRoi) {
    auto p0 = params;
    p0.s = 0;
    auto a = guided_sample(x, ye, m, p0, model, bank);
    auto b = guided_sample(x, ye, m, params, model, bank);
    double diff = 0;
    for (std::size_t i = 0; i < x.size(); ++i) diff += std::abs(a.candidates[0].image[i] - b.candidates[0].image[i]);
    EXPECT_GT(diff, 0.0);
    GuidanceOptions lit;
    lit.literal_sign = true;
    auto c = guided_sample(x, ye, m, params, model, bank, lit);
    EXPECT_NE(c.candidates[0].image.to_vector(), b.candidates[0].image.to_vector());
}

TEST_F(Sampler, DeterministicAndIndependentOfThreadCount) {
    GuidanceOptions one, many;
    one.threads = 1;
    many.threads = 3;
    auto a = guided_sample(x, ye, m, params, model, bank, one);
    auto b = guided_sample(x, ye, m, params, model, bank, many);
    for (std::size_t k = 0; k < a.candidates.size(); ++k) {
        EXPECT_EQ(a.candidates[k].image.to_vector(), b.candidates[k].image.to_vector());
        EXPECT_EQ(a.candidates[k].metrics.accuracy_inside, b.candidates[k].metrics.accuracy_inside);
        ASSERT_EQ(a.candidates[k].trace.size(), b.candidates[k].trace.size());
        for (std::size_t i = 0; i < a.candidates[k].trace.size(); ++i)
            EXPECT_EQ(a.candidates[k].trace[i].accuracy, b.candidates[k].trace[i].accuracy);
    }
    EXPECT_NE(a.candidates[0].image.to_vector(), a.candidates[1].image.to_vector());
}

TEST_F(Sampler, CandidateStreamsDoNotDependOnBatchSize) {
    auto p1 = params;
    p1.batch = 1;
    auto a = guided_sample(x, ye, m, p1, model, bank);
    auto b = guided_sample(x, ye, m, params, model, bank);
    EXPECT_EQ(a.candidates[0].image.to_vector(), b.candidates[0].image.to_vector());
}

TEST_F(Sampler, TraceDescendsOverTheGrid) {
    auto r = guided_sample(x, ye, m, params, model, bank);
    const auto grid = respace(model.sched, params.n_steps, params.t0);
    for (const auto& c : r.candidates) {
        ASSERT_EQ(c.trace.size(), static_cast<std::size_t>(params.n_steps));
        EXPECT_EQ(c.trace.front().t, params.t0);
        for (std::size_t i = 0; i < c.trace.size(); ++i) {
            EXPECT_EQ(c.trace[i].t, grid.steps()[grid.steps().size() - 1 - i]);
            EXPECT_DOUBLE_EQ(c.trace[i].snr, model.sched.snr(c.trace[i].t));
            EXPECT_GE(c.trace[i].accuracy, 0.0);
            EXPECT_LE(c.trace[i].accuracy, 1.0);
            if (i) {
                EXPECT_LT(c.trace[i].t, c.trace[i - 1].t);
            }
        }
        EXPECT_GE(c.metrics.accuracy_inside, 0.0);
    }
}

TEST_F(Sampler, ObserverSeesEveryStepInDescendingOrder) {
    std::mutex mu;
    std::map<std::size_t, std::vector<int>> seen;
    GuidanceOptions opt;
    opt.threads = 2;
    guided_sample(x, ye, m, params, model, bank, opt, [&](const StepEvent<double>& e) {
        ASSERT_NE(e.x0_pred, nullptr);
        EXPECT_EQ(e.x0_pred->shape(), (Shape{1, 3, 8, 8}));
        EXPECT_EQ(e.n_steps, 6u);
        std::lock_guard lock(mu);
        EXPECT_EQ(e.step, seen[e.candidate].size());
        seen[e.candidate].push_back(e.t);
    });
    ASSERT_EQ(seen.size(), 3u);
    for (const auto& [b, ts] : seen) {
        ASSERT_EQ(ts.size(), 6u);
        for (std::size_t i = 1; i < ts.size(); ++i) EXPECT_LT(ts[i], ts[i - 1]);
    }
}

TEST_F(Sampler, FullStepGridRuns) {
    GuidanceParams p{8, 1.0, 8, 1, 3};
    auto r = guided_sample(x, ye, m, p, model, bank);
    ASSERT_EQ(r.candidates[0].trace.size(), 8u);
    EXPECT_EQ(r.candidates[0].trace.back().t, 1);
}

TEST_F(Sampler, Errors) {
    try {
        guided_sample(x, ye, RoiMask::filled(8, 8, false), params, model, bank);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::empty_roi);
    }
    auto p = params;
    p.n_steps = 70;
    EXPECT_THROW(guided_sample(x, ye, m, p, model, bank), Error);
    EXPECT_THROW(guided_sample(x, ye, RoiMask::filled(4, 4, true), params, model, bank), Error);
}

TEST_F(Sampler, NonFiniteGradientAbortsCandidate) {
    auto bad = bank;
    std::vector<TD> ps = bad.per_t.begin()->second.parameters();
    std::vector<TD> copy;
    for (const auto& t : ps) copy.push_back(t.detach());
    copy[4] = TD::filled(copy[4].shape(), std::numeric_limits<double>::infinity());
    for (auto& [t, g] : bad.per_t) g = PixelClassifier<double>(copy);
    auto r = guided_sample(x, ye, m, params, model, bad);
    for (const auto& c : r.candidates) {
        EXPECT_TRUE(c.failed);
        EXPECT_FALSE(c.error.empty());
    }
    EXPECT_THROW(select_candidate(r, Selection::quantitative), Error);
}

TEST_F(Sampler, SingleGuidedStepDecreasesLoss) {
    // x_t, mu and grad at one step; compare the loss at mu and at the shifted mean.
    const auto grid = respace(model.sched, 10, 60);
    const std::size_t i = 5;
    const int t = grid.steps()[i];
    std::mt19937_64 rng(4);
    auto xt = q_sample(detail::as_batch1(x), t, randn<double>({1, 3, 8, 8}, rng), model.sched);
    const auto& g = bank.resolve(t);
    auto loss_at = [&](const TD& v) { return seg_loss(model.features(v, t), ye, m, g)[0]; };
    auto xin = xt.detach(true);
    auto grad = gradient(seg_loss(model.features(xin, t), ye, m, g), xin);
    auto mu = ddpm_mean(xt, model.eps(xt, t), grid.beta(i), grid.alpha_bar(t));
    const double var = grid.variance(i);
    for (double s : {1e-2, 1e-1}) {
        auto shifted = detail::axpby(1.0, mu, -s * var, grad);
        EXPECT_LT(loss_at(shifted), loss_at(mu)) << s;
        auto wrong = detail::axpby(1.0, mu, s * var, grad);
        EXPECT_GT(loss_at(wrong), loss_at(mu)) << s;
    }
}

// ---------------------------------------------------------------------------
// Inversion and interpolation

TEST(Interpolation, EndpointsReproduceReconstructionsBitwise) {
    auto model = tiny_model(8, 100);
    auto a = random_image(8, 1), b = random_image(8, 2);
    auto out = interpolate_latents(a, b, 60, 5, model, 6);
    ASSERT_EQ(out.size(), 5u);
    EXPECT_EQ(out.front().to_vector(), ddim_reconstruct(model, a, 60, 6).to_vector());
    EXPECT_EQ(out.back().to_vector(), ddim_reconstruct(model, b, 60, 6).to_vector());
    EXPECT_EQ(out.front().shape(), a.shape());
}

TEST(Interpolation, SelfInterpolationIsConstant) {
    auto model = tiny_model(8, 100);
    auto a = random_image(8, 3);
    auto rec = ddim_reconstruct(model, a, 40, 4).to_vector();
    for (const auto& v : interpolate_latents(a, a, 40, 3, model, 4)) EXPECT_EQ(v.to_vector(), rec);
}

TEST(Interpolation, Errors) {
    auto model = tiny_model(8, 100);
    auto a = random_image(8, 3);
    EXPECT_THROW(interpolate_latents(a, a, 40, 1, model, 4), Error);
    EXPECT_THROW(interpolate_latents(a, TD::zeros({3, 4, 4}), 40, 3, model, 4), Error);
    EXPECT_THROW(interpolate_latents(a, a, 40, 3, model, 41), Error);
}

TEST(Inversion, KeepsShapeAndRejectsBatches) {
    auto model = tiny_model(8, 100);
    auto x = detail::as_batch1(random_image(8, 4));
    const auto grid = respace(model.sched, 20, 20);
    auto z = ddim_invert(model, x, grid);
    EXPECT_EQ(z.shape(), x.shape());
    EXPECT_THROW(ddim_reconstruct(model, TD::zeros({2, 3, 8, 8}), 20, 5), Error);
}

// ---------------------------------------------------------------------------
// accuracy_inside, selection, serialization

TEST(AccuracyInside, DeterministicAndMatchesEstimatedMap) {
    auto model = tiny_model(8, 100);
    auto bank = tiny_bank(model, 4, 10);
    auto x = random_image(8, 5);
    std::mt19937_64 rng(9);
    auto ye = random_map(8, 8, 4, rng);
    auto m = rect_mask(8, 0, 4, 0, 8);
    const double a = accuracy_inside(x, ye, m, model, bank);
    EXPECT_EQ(a, accuracy_inside(x, ye, m, model, bank));
    EXPECT_EQ(a, masked_accuracy(estimate_map(x, model, bank), ye, m));
    auto self = estimate_map(x, model, bank);
    EXPECT_EQ(accuracy_inside(x, self, m, model, bank), 1.0);
    EXPECT_THROW(accuracy_inside(x, ye, RoiMask::filled(8, 8, false), model, bank), Error);
    bank.multi.reset();
    EXPECT_THROW(accuracy_inside(x, ye, m, model, bank), Error);
}

TEST(SelectCandidate, QuantitativeRanksAccuracyThenMae) {
    EditResult<double> r;
    auto mk = [](double acc, double mae, bool failed = false) {
        Candidate<double> c;
        c.metrics.accuracy_inside = acc;
        c.metrics.mae_outside = mae;
        c.failed = failed;
        return c;
    };
    r.candidates = {mk(0.5, 0.0), mk(0.9, 0.2), mk(0.9, 0.1), mk(1.0, 0.0, true)};
    EXPECT_EQ(select_candidate(r, Selection::quantitative), 2u);
    std::set<std::size_t> picks;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto k = select_candidate(r, Selection::random, s);
        EXPECT_EQ(k, select_candidate(r, Selection::random, s));
        picks.insert(k);
    }
    EXPECT_EQ(picks, (std::set<std::size_t>{0, 1, 2}));
    EXPECT_EQ(parse_selection("random"), Selection::random);
    EXPECT_THROW(parse_selection("best"), Error);
}

TEST(EditResultJson, CarriesParamsMetricsTracesAndRefs) {
    EditResult<double> r;
    r.params = {500, 10, 50, 2, 7};
    Candidate<double> ok;
    ok.image = TD::zeros({3, 2, 2});
    ok.metrics = {0.0, kPsnrCap, 0.75};
    ok.trace = {{500, 0.1, 0.2}, {490, 0.2, 0.5}};
    Candidate<double> bad;
    bad.failed = true;
    bad.error = "non-finite";
    r.candidates = {ok, bad};
    auto j = edit_result_to_json<double>(r, [](const TD&) { return std::string("abc"); });
    EXPECT_EQ(j["params"]["t0"], 500);
    EXPECT_EQ(j["candidates"][0]["image"], "abc");
    EXPECT_EQ(j["candidates"][0]["metrics"]["accuracy_inside"], 0.75);
    EXPECT_EQ(j["candidates"][0]["trace"][1]["t"], 490);
    EXPECT_TRUE(j["candidates"][1]["failed"].get<bool>());
    EXPECT_TRUE(j["candidates"][1]["metrics"]["accuracy_inside"].is_null());
    EXPECT_EQ(trace_to_csv(ok.trace), "t,snr,accuracy\n500,0.1,0.2\n490,0.2,0.5\n");
}
