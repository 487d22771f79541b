// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "pixguide/net/train.hpp"
#include "support/gradcheck.hpp"

using namespace pixguide;
using TD = Tensor<double>;

namespace {

UNetConfig tiny_config() {
    UNetConfig c;
    c.image_size = 8;
    c.base_width = 8;
    c.depth = 2;
    c.channel_mult = {1, 2};
    c.groups = 4;
    c.time_embed_dim = 16;
    c.decoder_block_ids = {0, 1};
    return c;
}

}  // namespace

TEST(TimeEmbedding, ZeroIsCosOnes) {
    auto e = time_embedding(0, 16);
    for (std::size_t i = 0; i < 8; ++i) {
        EXPECT_EQ(e[i], 1.0);
        EXPECT_EQ(e[8 + i], 0.0);
    }
    EXPECT_THROW(time_embedding(3, 15), Error);
    EXPECT_EQ(time_embedding(17, 32).to_vector(), time_embedding(17, 32).to_vector());
}

TEST(TimeEmbedding, DistinctOverSchedule) {
    std::set<std::vector<double>> seen;
    for (int t = 1; t <= 1000; ++t) seen.insert(time_embedding(t, 128).to_vector());
    EXPECT_EQ(seen.size(), 1000u);
    // Pairwise separation, not just bit-level distinctness.
    double closest = 1e9;
    std::vector<TD> all;
    for (int t = 1; t <= 1000; ++t) all.push_back(time_embedding(t, 128));
    for (int a = 0; a < 1000; ++a)
        for (int b = a + 1; b < 1000; ++b) {
            double d = 0;
            for (std::size_t i = 0; i < 128; ++i) d += (all[a][i] - all[b][i]) * (all[a][i] - all[b][i]);
            closest = std::min(closest, d);
        }
    EXPECT_GT(closest, 1e-6);
}

TEST(UNet, ShapeContractAndDeterminism) {
    UNet<double> net(UNetConfig{}, 3);
    std::mt19937_64 rng(1);
    auto x = randn<double>({2, 3, 32, 32}, rng);
    auto a = net.forward(x, 250);
    auto b = net.forward(x, 250);
    EXPECT_EQ(a.eps.shape(), x.shape());
    EXPECT_EQ(a.eps.to_vector(), b.eps.to_vector());
    ASSERT_EQ(a.decoder.size(), 3u);
    EXPECT_EQ(a.decoder[0].shape(), (Shape{2, 64, 8, 8}));
    EXPECT_EQ(a.decoder[1].shape(), (Shape{2, 64, 16, 16}));
    EXPECT_EQ(a.decoder[2].shape(), (Shape{2, 32, 32, 32}));
    EXPECT_EQ(UNetConfig{}.feature_dim(), 160u);
}

TEST(UNet, BatchInvariant) {
    UNet<double> net(tiny_config(), 4);
    std::mt19937_64 rng(2);
    auto x = randn<double>({3, 3, 8, 8}, rng);
    auto batched = net.forward(x, {5, 50, 500}).eps;
    for (std::size_t s = 0; s < 3; ++s) {
        std::vector<double> one(x.values().begin() + s * 192, x.values().begin() + (s + 1) * 192);
        auto single = net.forward(TD({1, 3, 8, 8}, one), {std::array{5, 50, 500}[s]}).eps;
        for (std::size_t i = 0; i < 192; ++i) EXPECT_EQ(single[i], batched[s * 192 + i]);
    }
}

TEST(UNet, RejectsBadInput) {
    UNet<double> net(tiny_config(), 4);
    EXPECT_THROW(net.forward(TD::zeros({1, 3, 16, 16}), 3), Error);
    EXPECT_THROW(net.forward(TD::zeros({1, 3, 8, 8}), -1), Error);
    auto bad = tiny_config();
    bad.image_size = 6;
    EXPECT_THROW(UNet<double>(bad, 1), Error);
    bad = tiny_config();
    bad.decoder_block_ids = {2};
    EXPECT_THROW(UNet<double>(bad, 1), Error);
}

TEST(UNet, InputGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 3; ++trial) {
        UNet<double> net(tiny_config(), 10 + trial);
        auto f = [&](const std::vector<TD>& in) { return net.forward(in[0], 37).eps; };
        auto r = pixguide::testing::check_gradients(f, {pixguide::testing::random_tensor({1, 3, 8, 8}, rng)}, rng);
        EXPECT_LT(r.max_rel_error, 1e-4);
    }
}

TEST(UNet, FeatureGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(6);
    auto cfg = tiny_config();
    UNet<double> net(cfg, 12);
    auto f = [&](const std::vector<TD>& in) { return extract_pixel_features(net.forward(in[0], 9).decoder, cfg); };
    auto r = pixguide::testing::check_gradients(f, {pixguide::testing::random_tensor({1, 3, 8, 8}, rng)}, rng);
    EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(Features, FullResolutionBlockIsVerbatim) {
    auto cfg = tiny_config();
    cfg.decoder_block_ids = {1};
    std::mt19937_64 rng(7);
    auto act = randn<double>({1, 16, 8, 8}, rng);
    std::vector<TD> blocks{randn<double>({1, 16, 4, 4}, rng), act};
    EXPECT_EQ(extract_pixel_features(blocks, cfg).to_vector(), act.to_vector());
}

TEST(Features, DimAndConstantBlocks) {
    auto cfg = tiny_config();
    std::vector<TD> blocks{TD::filled({1, 16, 4, 4}, 0.7), TD::filled({1, 8, 8, 8}, -0.2)};
    auto f = extract_pixel_features(blocks, cfg);
    EXPECT_EQ(f.shape(), (Shape{1, 24, 8, 8}));
    EXPECT_EQ(cfg.feature_dim(), 24u);
    for (std::size_t i = 0; i < 16 * 64; ++i) EXPECT_DOUBLE_EQ(f[i], 0.7);
    for (std::size_t i = 16 * 64; i < 24 * 64; ++i) EXPECT_DOUBLE_EQ(f[i], -0.2);
}

TEST(Features, PermutingBlockIdsPermutesFeatures) {
    auto cfg = tiny_config();
    std::mt19937_64 rng(8);
    std::vector<TD> blocks{randn<double>({1, 16, 4, 4}, rng), randn<double>({1, 8, 8, 8}, rng)};
    auto fwd = extract_pixel_features(blocks, cfg);
    cfg.decoder_block_ids = {1, 0};
    auto rev = extract_pixel_features(blocks, cfg);
    for (std::size_t c = 0; c < 24; ++c) {
        const std::size_t src = c < 8 ? 16 + c : c - 8;
        for (std::size_t p = 0; p < 64; ++p) EXPECT_EQ(rev[c * 64 + p], fwd[src * 64 + p]);
    }
}

TEST(Features, MissingBlockThrows) {
    auto cfg = tiny_config();
    EXPECT_THROW(extract_pixel_features(std::vector<TD>{TD::zeros({1, 16, 4, 4})}, cfg), Error);
}

TEST(TrainDdpm, LossDecreasesAndBeatsZeroPredictor) {
    // Two flat-colored images are trivially learnable.
    std::vector<TD> images{TD::filled({3, 8, 8}, 0.8), TD::filled({3, 8, 8}, -0.6)};
    auto sched = default_schedule(100);
    DdpmTrainConfig tc;
    tc.steps = 150;
    tc.batch = 4;
    tc.warmup = 10;
    auto r = train_ddpm(images, tiny_config(), sched, tc);
    ASSERT_EQ(r.losses.size(), 150u);
    double head = 0, tail = 0;
    for (int i = 0; i < 20; ++i) head += r.losses[i] / 20, tail += r.losses[130 + i] / 20;
    EXPECT_LT(tail, head);
    EXPECT_LT(tail, 1.0);
}

TEST(TrainDdpm, EmptyDatasetThrows) {
    try {
        train_ddpm(std::vector<TD>{}, tiny_config(), default_schedule(10), {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::empty_dataset);
    }
}

TEST(TrainDdpm, DivergenceAborts) {
    std::vector<TD> images{TD::filled({3, 8, 8}, 0.5)};
    DdpmTrainConfig tc;
    tc.steps = 20;
    tc.batch = 2;
    tc.warmup = 0;
    tc.grad_clip = 0;
    tc.adam.lr = 1e300;
    try {
        train_ddpm(images, tiny_config(), default_schedule(10), tc);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::divergence);
    }
}

TEST(DiffusionModel, CheckpointRoundTrip) {
    DiffusionModel<double> m{UNet<double>(tiny_config(), 21), default_schedule(50)};
    auto path = std::filesystem::temp_directory_path() / "pixguide_model_test.ckpt";
    m.save(path);
    auto back = DiffusionModel<double>::load(path);
    auto backf = DiffusionModel<float>::load(path);
    std::mt19937_64 rng(3);
    auto x = randn<double>({1, 3, 8, 8}, rng);
    EXPECT_EQ(back.eps(x, 7).to_vector(), m.eps(x, 7).to_vector());
    EXPECT_EQ(back.sched.betas(), m.sched.betas());
    EXPECT_EQ(backf.net.parameter_count(), m.net.parameter_count());
    EXPECT_THROW(m.eps(x, 51), Error);
    std::filesystem::remove(path);
}
