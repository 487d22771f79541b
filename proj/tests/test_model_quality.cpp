// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

// Checks on the trained toy artifacts. The artifacts directory comes from
// PIXGUIDE_TOY_ARTIFACTS (set by ctest after the fixture step).

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>

#include "pixguide/pixguide.hpp"
#include "pixguide/service/pipeline.hpp"

using namespace pixguide;
namespace fs = std::filesystem;

namespace {

class Trained : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        const char* dir = std::getenv("PIXGUIDE_TOY_ARTIFACTS");
        if (!dir) return;
        const fs::path root(dir);
        art_ = load_artifacts(root / "model.ckpt", root / "bank.ckpt");
        test_ = std::make_unique<Split>(load_split(root / "data", "test"));
    }

    void SetUp() override {
        if (!std::getenv("PIXGUIDE_TOY_ARTIFACTS")) GTEST_SKIP() << "PIXGUIDE_TOY_ARTIFACTS not set";
        ASSERT_TRUE(art_);
    }

    static const DiffusionModel<double>& model() { return art_->model; }
    static const ClassifierBank<double>& bank() { return art_->bank; }
    static const Split& test() { return *test_; }

    static inline std::shared_ptr<const Artifacts> art_;
    static inline std::unique_ptr<Split> test_;
};

}  // namespace

TEST_F(Trained, ClassifierAtT50IsAccurateOnHeldOutScenes) {
    const auto& g = bank().resolve(50);
    ASSERT_EQ(bank().resolve_t(50), 50);
    const std::vector<Tensor<double>> images(test().images.begin(), test().images.begin() + 20);
    const std::vector<SegMap> maps(test().labels.begin(), test().labels.begin() + 20);
    EXPECT_GT(pixel_accuracy(g, images, maps, {50}, model(), 1), 0.9);
}

TEST_F(Trained, ClassifierAccuracyFallsTowardT) {
    const std::vector<Tensor<double>> images(test().images.begin(), test().images.begin() + 10);
    const std::vector<SegMap> maps(test().labels.begin(), test().labels.begin() + 10);
    const int t_hi = bank().trained_ts().back();
    ASSERT_GE(t_hi, 500);
    const double lo = pixel_accuracy(bank().resolve(50), images, maps, {50}, model(), 2);
    const double hi = pixel_accuracy(bank().resolve(t_hi), images, maps, {t_hi}, model(), 2);
    EXPECT_LT(hi, lo) << "t=50: " << lo << ", t=" << t_hi << ": " << hi;
}

TEST_F(Trained, RegenerationKeepsTheLayout) {
    // Test scenes noised to t0 and regenerated with DDIM, the regime the editor
    // works in. The multi-step classifier must still find the source layout.
    constexpr int t0 = 500;
    const auto grid = respace(model().sched, 50, t0);
    std::mt19937_64 rng(9);
    double mean = 0;
    for (std::size_t i = 20; i < 36; ++i) {
        const auto x0 = detail::as_batch1(test().images[i]);
        const auto xt = q_sample(x0, t0, randn<double>(x0.shape(), rng), model().sched);
        const auto est = estimate_map(detail::as_image(ddim_generate(model(), xt, grid)), model(), bank());
        std::size_t hit = 0;
        for (std::size_t p = 0; p < est.size(); ++p) hit += est.labels[p] == test().labels[i].labels[p];
        const double acc = static_cast<double>(hit) / static_cast<double>(est.size());
        std::printf("scene %zu: %.4f\n", i, acc);
        mean += acc / 16;
    }
    EXPECT_GT(mean, 0.85);
}

TEST_F(Trained, MoveEyeEditGuidanceBeatsUnguided) {
    BenchmarkEdit e{EditKind::move_eyes};
    e.dy = -2;
    const auto& x = test().images[3];
    const auto& y = test().labels[3];
    const auto ye = apply_benchmark_edit(y, e);
    const auto m = build_roi_mask(y, ye, e.q_edit());
    const auto policy = ParamPolicy::toy();
    double margin = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        GuidanceParams p{policy.small.t0, policy.small.s, policy.n_steps, 1, seed};
        const double guided = guided_sample(x, ye, m, p, model(), bank()).candidates[0].metrics.accuracy_inside;
        p.s = 0;
        const double plain = guided_sample(x, ye, m, p, model(), bank()).candidates[0].metrics.accuracy_inside;
        margin += (guided - plain) / 20;
    }
    EXPECT_GE(margin, 0.10);
}
