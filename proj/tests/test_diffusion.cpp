// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pixguide/diffusion/sampling.hpp"
#include "pixguide/diffusion/schedule.hpp"
#include "support/stats.hpp"

using namespace pixguide;
using TD = Tensor<double>;

namespace {

TD random_image(std::mt19937_64& rng, Shape shape = {1, 3, 4, 4}) { return randn<double>(shape, rng); }

double max_abs_diff(const TD& a, const TD& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST(Schedule, SingleStep) {
    auto s = build_schedule(1, 0.1, 0.1);
    EXPECT_DOUBLE_EQ(s.alpha_bar(1), 0.9);
    EXPECT_EQ(s.alpha_bar(0), 1.0);
    EXPECT_EQ(s.sigma(1), 0.0);
}

TEST(Schedule, LinearThousandSteps) {
    auto s = default_schedule(1000);
    double prod = 1;
    for (int t = 1; t <= 1000; ++t) {
        prod *= 1 - (1e-4 + (0.02 - 1e-4) * (t - 1) / 999.0);
        EXPECT_NEAR(s.alpha_bar(t), prod, 1e-14);
        if (t > 1) { EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1)); }
        EXPECT_GT(s.beta(t), 0);
        EXPECT_LT(s.beta(t), 1);
    }
    EXPECT_DOUBLE_EQ(s.alpha_bar(1), 1 - 1e-4);
    EXPECT_LT(s.alpha_bar(1000), 1e-3);
}

TEST(Schedule, PosteriorVariance) {
    auto s = default_schedule(100);
    for (int t = 2; t <= 100; ++t) {
        const double expect = (1 - s.alpha_bar(t - 1)) / (1 - s.alpha_bar(t)) * s.beta(t);
        EXPECT_NEAR(s.sigma(t) * s.sigma(t), expect, 1e-15);
    }
    auto b = build_schedule(100, 1e-4, 0.02, ScheduleKind::linear, VarianceKind::beta);
    EXPECT_NEAR(b.sigma(50), std::sqrt(b.beta(50)), 1e-15);
}

TEST(Schedule, RejectsBadParameters) {
    EXPECT_THROW(build_schedule(10, 1e-4, 1.0), Error);
    EXPECT_THROW(build_schedule(10, 0.0, 0.1), Error);
    EXPECT_THROW(build_schedule(10, 0.2, 0.1), Error);
    EXPECT_THROW(build_schedule(0, 0.1, 0.1), Error);
}

TEST(QSample, ZeroNoiseScalesSignal) {
    std::mt19937_64 rng(1);
    auto s = default_schedule(1000);
    auto x0 = random_image(rng);
    auto xt = q_sample(x0, 300, TD::zeros(x0.shape()), s);
    for (std::size_t i = 0; i < x0.size(); ++i) EXPECT_DOUBLE_EQ(xt[i], std::sqrt(s.alpha_bar(300)) * x0[i]);
}

TEST(QSample, UnitAlphaBarIsIdentity) {
    std::mt19937_64 rng(2);
    auto x0 = random_image(rng);
    auto eps = random_image(rng);
    EXPECT_EQ(noise_to_level(x0, 1.0, eps).to_vector(), x0.to_vector());
}

TEST(QSample, RejectsOutOfRange) {
    auto s = default_schedule(10);
    TD x = TD::zeros({1, 1, 2, 2});
    EXPECT_THROW(q_sample(x, 0, x, s), Error);
    EXPECT_THROW(q_sample(x, 11, x, s), Error);
}

TEST(QSample, MonteCarloMomentsWithinThreeStandardErrors) {
    auto s = default_schedule(1000);
    std::mt19937_64 rng(99);
    TD x0({1, 1, 1, 3}, {0.8, -0.3, 0.0});
    for (int t : {10, 500, 1000}) {
        auto m = pixguide::testing::q_sample_moments(x0, t, s, 10000, rng);
        for (std::size_t i = 0; i < x0.size(); ++i) {
            EXPECT_LT(std::abs(m.mean[i] - std::sqrt(s.alpha_bar(t)) * x0[i]), 3 * m.mean_se[i]) << "t=" << t;
            EXPECT_LT(std::abs(m.var[i] - (1 - s.alpha_bar(t))), 3 * m.var_se[i]) << "t=" << t;
        }
    }
}

TEST(DdpmStep, NoOpLimit) {
    auto s = build_schedule(10, 1e-12, 1e-12);
    std::mt19937_64 rng(3);
    auto x = random_image(rng);
    auto out = ddpm_step(x, 5, TD::zeros(x.shape()), TD::zeros(x.shape()), s);
    EXPECT_LT(max_abs_diff(out, x), 1e-10);
}

TEST(DdpmStep, RecoversCleanImageAtFirstStep) {
    // With x_1 = q_sample(x0, 1, eps) and the true eps, the reverse mean is x0.
    auto s = default_schedule(1000);
    std::mt19937_64 rng(4);
    auto x0 = random_image(rng), eps = random_image(rng), noise = random_image(rng);
    auto x1 = q_sample(x0, 1, eps, s);
    auto out = ddpm_step(x1, 1, eps, noise, s);
    EXPECT_LT(max_abs_diff(out, x0), 1e-12);
}

TEST(DdpmStep, MatchesClosedForm) {
    auto s = default_schedule(1000);
    std::mt19937_64 rng(5);
    auto x = random_image(rng), eps = random_image(rng), noise = random_image(rng);
    const int t = 400;
    auto out = ddpm_step(x, t, eps, noise, s);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double expect = (x[i] - s.beta(t) / std::sqrt(1 - s.alpha_bar(t)) * eps[i]) / std::sqrt(1 - s.beta(t)) +
                              s.sigma(t) * noise[i];
        EXPECT_NEAR(out[i], expect, 1e-12);
    }
}

TEST(DdpmStep, ShapeMismatchThrows) {
    auto s = default_schedule(10);
    EXPECT_THROW(ddpm_step(TD::zeros({1, 1, 2, 2}), 3, TD::zeros({1, 1, 2, 3}), TD::zeros({1, 1, 2, 2}), s), Error);
    EXPECT_THROW(ddpm_step(TD::zeros({1, 1, 2, 2}), 0, TD::zeros({1, 1, 2, 2}), TD::zeros({1, 1, 2, 2}), s), Error);
}

TEST(FTheta, InvertsForwardNoising) {
    auto s = default_schedule(1000);
    std::mt19937_64 rng(6);
    for (int t : {1, 37, 500, 999}) {
        auto x0 = random_image(rng), eps = random_image(rng);
        auto xt = q_sample(x0, t, eps, s);
        auto back = f_theta(xt, t, eps, s);
        EXPECT_LT(max_abs_diff(back, x0), 1e-9 / std::sqrt(s.alpha_bar(t))) << t;
        // Re-noising with the same eps reproduces x_t.
        EXPECT_LT(max_abs_diff(q_sample(back, t, eps, s), xt), 1e-12) << t;
    }
    auto x = TD({1}, {2.0});
    EXPECT_DOUBLE_EQ(f_theta(x, 10, TD({1}, {0.0}), s)[0], 2.0 / std::sqrt(s.alpha_bar(10)));
    EXPECT_THROW(f_theta(x, 0, x, s), Error);
}

TEST(DdimStep, PerfectNoiseTransportsBetweenLevels) {
    auto s = default_schedule(1000);
    std::mt19937_64 rng(7);
    auto x0 = random_image(rng), eps = random_image(rng);
    for (auto [t, tp] : std::vector<std::pair<int, int>>{{500, 490}, {750, 100}, {20, 1}}) {
        auto out = ddim_step(q_sample(x0, t, eps, s), t, tp, eps, s);
        EXPECT_LT(max_abs_diff(out, q_sample(x0, tp, eps, s)), 1e-10);
    }
    auto to_zero = ddim_step(q_sample(x0, 10, eps, s), 10, 0, eps, s);
    EXPECT_LT(max_abs_diff(to_zero, x0), 1e-12);
}

TEST(DdimStep, SameStepIsIdentity) {
    auto s = default_schedule(1000);
    std::mt19937_64 rng(8);
    auto x0 = random_image(rng), eps = random_image(rng);
    auto xt = q_sample(x0, 300, eps, s);
    EXPECT_LT(max_abs_diff(ddim_step(xt, 300, 300, eps, s), xt), 1e-12);
}

TEST(DdimStep, OrderingViolationThrows) {
    auto s = default_schedule(100);
    TD x = TD::zeros({1, 1, 2, 2});
    EXPECT_THROW(ddim_step(x, 10, 11, x, s), Error);
    EXPECT_THROW(ddim_invert_step(x, 10, 10, x, s), Error);
    EXPECT_THROW(ddim_invert_step(x, 10, 9, x, s), Error);
}

TEST(DdimInvert, ConstantNoisePredictionIsExactInverse) {
    auto s = default_schedule(1000);
    std::mt19937_64 rng(9);
    auto x = random_image(rng), eps = random_image(rng);
    for (auto [t, tn] : std::vector<std::pair<int, int>>{{0, 10}, {10, 20}, {250, 500}}) {
        auto up = ddim_invert_step(x, t, tn, eps, s);
        auto down = ddim_step(up, tn, t, eps, s);
        EXPECT_LT(max_abs_diff(down, x), 1e-9) << t << "->" << tn;
    }
}

TEST(Respace, FiftyStepsUpTo500) {
    auto s = default_schedule(1000);
    auto r = respace(s, 50, 500);
    ASSERT_EQ(r.size(), 50);
    EXPECT_EQ(r.last(), 500);
    for (int i = 0; i < 50; ++i) EXPECT_EQ(r.steps()[static_cast<std::size_t>(i)], 10 * (i + 1));
}

TEST(Respace, FullGridIsIdentity) {
    auto s = default_schedule(100);
    auto r = respace(s, 60, 60);
    for (int i = 0; i < 60; ++i) EXPECT_EQ(r.steps()[static_cast<std::size_t>(i)], i + 1);
    for (std::size_t i = 0; i < 60; ++i) EXPECT_EQ(r.beta(i), s.beta(r.steps()[i]));
}

TEST(Respace, PreservesAlphaBarAndTelescopes) {
    auto s = default_schedule(1000);
    for (auto [n, t0] : std::vector<std::pair<int, int>>{{50, 750}, {7, 100}, {33, 1000}}) {
        auto r = respace(s, n, t0);
        EXPECT_EQ(r.last(), t0);
        double prod = 1;
        for (std::size_t i = 0; i < r.steps().size(); ++i) {
            EXPECT_EQ(r.alpha_bar(r.steps()[i]), s.alpha_bar(r.steps()[i]));
            if (i) { EXPECT_GT(r.steps()[i], r.steps()[i - 1]); }
            prod *= 1 - r.beta(i);
            EXPECT_NEAR(prod, s.alpha_bar(r.steps()[i]), 1e-13);
        }
    }
    EXPECT_THROW(respace(s, 51, 50), Error);
    EXPECT_THROW(respace(s, 10, 1001), Error);
}

TEST(Snr, UnitAtHalf) {
    // abar = 0.5 for a single step with beta 0.5.
    auto s = build_schedule(1, 0.5, 0.5);
    EXPECT_DOUBLE_EQ(s.snr(1), 1.0);
}

TEST(Snr, StrictlyDecreasingAndBand) {
    auto s = default_schedule(1000);
    int first = 0, last = 0;
    for (int t = 1; t <= 1000; ++t) {
        EXPECT_GT(s.snr(t), 0);
        if (t > 1) { EXPECT_LT(s.snr(t), s.snr(t - 1)); }
        if (s.snr(t) >= 1e-2 && s.snr(t) <= 1) {
            if (!first) first = t;
            last = t;
        }
    }
    // The recognizable-content band is one contiguous interval of t.
    ASSERT_GT(first, 0);
    for (int t = first; t <= last; ++t) EXPECT_TRUE(s.snr(t) >= 1e-2 && s.snr(t) <= 1);
    EXPECT_LT(first, 500);
    EXPECT_GT(last, 500);
    EXPECT_THROW(s.snr(0), Error);
}
