// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <string>
#include <vector>

#include "pixguide/tensor/ops.hpp"

namespace pixguide {

struct UNetConfig {
    std::size_t image_size = 32;
    std::size_t channels = 3;
    std::size_t base_width = 32;
    /// Number of down/up stages. Stage i runs at image_size / 2^i.
    std::size_t depth = 3;
    /// Width multiplier per stage; size must equal depth.
    std::vector<std::size_t> channel_mult{1, 2, 2};
    std::size_t groups = 8;
    std::size_t time_embed_dim = 128;
    /// Decoder activations that feed pixel features. Index 0 is the deepest
    /// decoder block, index depth-1 the full-resolution one.
    std::vector<std::size_t> decoder_block_ids{0, 1, 2};

    std::size_t stage_width(std::size_t i) const { return base_width * channel_mult.at(i); }
    std::size_t stage_size(std::size_t i) const { return image_size >> i; }

    /// Decoder block b sits at stage depth-1-b.
    std::size_t decoder_width(std::size_t b) const { return stage_width(depth - 1 - b); }
    std::size_t decoder_size(std::size_t b) const { return stage_size(depth - 1 - b); }

    std::size_t feature_dim() const {
        std::size_t d = 0;
        for (auto b : decoder_block_ids) d += decoder_width(b);
        return d;
    }

    void validate() const {
        PIXGUIDE_CHECK(depth >= 1 && channel_mult.size() == depth, invalid_argument,
                       "unet: channel_mult must have one entry per stage");
        PIXGUIDE_CHECK(image_size > 0 && image_size % (std::size_t{1} << depth) == 0, invalid_argument,
                       "unet: image_size must be divisible by 2^depth");
        PIXGUIDE_CHECK(channels > 0 && base_width > 0 && time_embed_dim > 0 && time_embed_dim % 2 == 0,
                       invalid_argument, "unet: widths must be positive and time_embed_dim even");
        for (std::size_t i = 0; i < depth; ++i)
            PIXGUIDE_CHECK(stage_width(i) % groups == 0, invalid_argument, "unet: widths must divide into groups");
        PIXGUIDE_CHECK(!decoder_block_ids.empty(), invalid_argument, "unet: decoder_block_ids is empty");
        for (auto b : decoder_block_ids)
            PIXGUIDE_CHECK(b < depth, out_of_range, "unet: decoder block id " + std::to_string(b) + " out of range");
    }

    nlohmann::json to_json() const {
        return {{"image_size", image_size},         {"channels", channels}, {"base_width", base_width},
                {"depth", depth},                   {"channel_mult", channel_mult}, {"groups", groups},
                {"time_embed_dim", time_embed_dim}, {"decoder_block_ids", decoder_block_ids}};
    }

    static UNetConfig from_json(const nlohmann::json& j) {
        UNetConfig c;
        c.image_size = j.at("image_size");
        c.channels = j.at("channels");
        c.base_width = j.at("base_width");
        c.depth = j.at("depth");
        c.channel_mult = j.at("channel_mult").get<std::vector<std::size_t>>();
        c.groups = j.at("groups");
        c.time_embed_dim = j.at("time_embed_dim");
        c.decoder_block_ids = j.at("decoder_block_ids").get<std::vector<std::size_t>>();
        c.validate();
        return c;
    }
};

/// Sinusoidal embedding of a single timestep: [cos | sin] halves.
template <class T = double>
Tensor<T> time_embedding(int t, std::size_t dim) {
    return reshape(embed_time<T>({t}, dim), Shape{dim});
}

template <class T>
struct UNetOutput {
    Tensor<T> eps;
    /// One activation per decoder block, [N, C_b, H_b, W_b].
    std::vector<Tensor<T>> decoder;
};

/// Residual U-Net noise estimator with GroupNorm, SiLU and additive timestep
/// conditioning. No attention.
template <class T>
class UNet {
public:
    using ParamMap = std::map<std::string, Tensor<T>>;

    UNet(UNetConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
        cfg_.validate();
        std::mt19937_64 rng(seed);
        build([&](const std::string& name, Shape shape, std::size_t fan_in, Init init) {
            std::vector<T> v(numel(shape));
            if (init == Init::uniform) {
                const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
                std::uniform_real_distribution<double> u(-bound, bound);
                for (auto& x : v) x = static_cast<T>(u(rng));
            } else if (init == Init::one) {
                std::fill(v.begin(), v.end(), T(1));
            }
            params_.emplace(name, Tensor<T>(std::move(shape), std::move(v)));
        });
    }

    UNet(UNetConfig cfg, ParamMap params) : cfg_(std::move(cfg)), params_(std::move(params)) {
        cfg_.validate();
        build([&](const std::string& name, Shape shape, std::size_t, Init) {
            auto it = params_.find(name);
            PIXGUIDE_CHECK(it != params_.end(), missing_artifact, "unet: missing parameter " + name);
            PIXGUIDE_CHECK(it->second.shape() == shape, shape_mismatch,
                           "unet: parameter " + name + " has shape " + to_string(it->second.shape()) +
                               ", expected " + to_string(shape));
        });
        PIXGUIDE_CHECK(params_.size() == order_.size(), invalid_argument, "unet: unexpected extra parameters");
    }

    const UNetConfig& config() const { return cfg_; }
    const ParamMap& params() const { return params_; }
    const std::vector<std::string>& param_names() const { return order_; }

    std::vector<Tensor<T>> parameters() const {
        std::vector<Tensor<T>> out;
        for (const auto& n : order_) out.push_back(params_.at(n));
        return out;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& [_, p] : params_) n += p.size();
        return n;
    }

    void set_trainable(bool flag) {
        for (auto& [_, p] : params_) p.set_requires_grad(flag);
    }

    /// x [N, channels, S, S]; one timestep per sample.
    UNetOutput<T> forward(const Tensor<T>& x, const std::vector<int>& ts) const {
        detail::require_rank(x, 4, "unet");
        PIXGUIDE_CHECK(x.dim(1) == cfg_.channels && x.dim(2) == cfg_.image_size && x.dim(3) == cfg_.image_size,
                       shape_mismatch, "unet: input shape " + to_string(x.shape()) + " does not match config");
        PIXGUIDE_CHECK(ts.size() == x.dim(0), shape_mismatch, "unet: need one timestep per sample");
        for (int t : ts) PIXGUIDE_CHECK(t >= 0, out_of_range, "unet: negative timestep");

        // Row-at-a-time so each sample's result does not depend on the batch size.
        std::vector<Tensor<T>> rows;
        for (int t : ts) {
            auto e = embed_time<T>({t}, cfg_.base_width);
            rows.push_back(linear(silu(linear(e, p("time.l1.w"), p("time.l1.b"))), p("time.l2.w"), p("time.l2.b")));
        }
        const auto act = silu(rows.size() == 1 ? rows.front() : concat(rows, 0));

        auto h = conv2d(x, p("in.w"), p("in.b"), {1, 1});
        std::vector<Tensor<T>> skips;
        for (std::size_t i = 0; i < cfg_.depth; ++i) {
            h = resblock("enc" + std::to_string(i), h, act);
            skips.push_back(h);
            h = conv2d(h, p("down" + std::to_string(i) + ".w"), p("down" + std::to_string(i) + ".b"), {2, 1});
        }
        h = resblock("mid", h, act);

        UNetOutput<T> out;
        for (std::size_t b = 0; b < cfg_.depth; ++b) {
            const std::size_t stage = cfg_.depth - 1 - b;
            const auto s = cfg_.stage_size(stage);
            h = upsample_bilinear(h, s, s);
            h = concat<T>({h, skips[stage]}, 1);
            h = resblock("dec" + std::to_string(b), h, act);
            out.decoder.push_back(h);
        }
        h = silu(group_norm(h, cfg_.groups, p("out.gn.g"), p("out.gn.b")));
        out.eps = conv2d(h, p("out.w"), p("out.b"), {1, 1});
        return out;
    }

    UNetOutput<T> forward(const Tensor<T>& x, int t) const {
        return forward(x, std::vector<int>(x.rank() == 4 ? x.dim(0) : 0, t));
    }

private:
    enum class Init { uniform, zero, one };

    const Tensor<T>& p(const std::string& name) const { return params_.at(name); }

    Tensor<T> resblock(const std::string& n, const Tensor<T>& x, const Tensor<T>& temb_act) const {
        auto h = conv2d(silu(group_norm(x, cfg_.groups, p(n + ".gn1.g"), p(n + ".gn1.b"))), p(n + ".c1.w"),
                        p(n + ".c1.b"), {1, 1});
        std::vector<Tensor<T>> shift;
        for (std::size_t i = 0; i < temb_act.dim(0); ++i)
            shift.push_back(linear(gather_rows(temb_act, {i}), p(n + ".t.w"), p(n + ".t.b")));
        h = add_channel_bias(h, shift.size() == 1 ? shift.front() : concat(shift, 0));
        h = conv2d(silu(group_norm(h, cfg_.groups, p(n + ".gn2.g"), p(n + ".gn2.b"))), p(n + ".c2.w"),
                   p(n + ".c2.b"), {1, 1});
        const auto skip = params_.count(n + ".skip.w") ? conv2d(x, p(n + ".skip.w"), p(n + ".skip.b")) : x;
        return add(h, skip);
    }

    template <class Fn>
    void build(Fn&& make) {
        auto param = [&](const std::string& name, Shape shape, std::size_t fan_in, Init init) {
            order_.push_back(name);
            make(name, std::move(shape), fan_in, init);
        };
        auto conv = [&](const std::string& n, std::size_t in, std::size_t out, std::size_t k) {
            param(n + ".w", {out, in, k, k}, in * k * k, Init::uniform);
            param(n + ".b", {out}, in * k * k, Init::uniform);
        };
        auto dense = [&](const std::string& n, std::size_t in, std::size_t out) {
            param(n + ".w", {out, in}, in, Init::uniform);
            param(n + ".b", {out}, in, Init::uniform);
        };
        auto norm = [&](const std::string& n, std::size_t c) {
            param(n + ".g", {c}, 1, Init::one);
            param(n + ".b", {c}, 1, Init::zero);
        };
        const auto e = cfg_.time_embed_dim;
        auto res = [&](const std::string& n, std::size_t in, std::size_t out) {
            norm(n + ".gn1", in);
            conv(n + ".c1", in, out, 3);
            dense(n + ".t", e, out);
            norm(n + ".gn2", out);
            conv(n + ".c2", out, out, 3);
            if (in != out) conv(n + ".skip", in, out, 1);
        };

        dense("time.l1", cfg_.base_width, e);
        dense("time.l2", e, e);
        conv("in", cfg_.channels, cfg_.base_width, 3);
        std::size_t c = cfg_.base_width;
        for (std::size_t i = 0; i < cfg_.depth; ++i) {
            res("enc" + std::to_string(i), c, cfg_.stage_width(i));
            c = cfg_.stage_width(i);
            conv("down" + std::to_string(i), c, c, 3);
        }
        res("mid", c, c);
        for (std::size_t b = 0; b < cfg_.depth; ++b) {
            const std::size_t stage = cfg_.depth - 1 - b;
            res("dec" + std::to_string(b), c + cfg_.stage_width(stage), cfg_.stage_width(stage));
            c = cfg_.stage_width(stage);
        }
        norm("out.gn", c);
        conv("out", c, cfg_.channels, 3);
    }

    UNetConfig cfg_;
    ParamMap params_;
    std::vector<std::string> order_;
};

/// Upsamples the selected decoder activations to full resolution and stacks
/// them along channels: [N, d, S, S]. Stays on the autodiff graph.
template <class T>
Tensor<T> extract_pixel_features(const std::vector<Tensor<T>>& activations, const UNetConfig& cfg) {
    std::vector<Tensor<T>> parts;
    for (auto b : cfg.decoder_block_ids) {
        PIXGUIDE_CHECK(b < activations.size(), out_of_range,
                       "extract_pixel_features: decoder block " + std::to_string(b) + " missing");
        parts.push_back(upsample_bilinear(activations[b], cfg.image_size, cfg.image_size));
    }
    return parts.size() == 1 ? parts.front() : concat(parts, 1);
}

}  // namespace pixguide
