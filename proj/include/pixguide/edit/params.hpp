// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>

#include "pixguide/data/segmap.hpp"

namespace pixguide {

struct GuidanceParams {
    int t0 = 500;
    double s = 100.0;
    int n_steps = 50;
    int batch = 4;
    std::uint64_t seed = 0;

    void validate(int T) const {
        PIXGUIDE_CHECK(n_steps >= 1, out_of_range, "params: n_steps must be >= 1");
        PIXGUIDE_CHECK(n_steps <= t0, out_of_range,
                       "params: n_steps (" + std::to_string(n_steps) + ") exceeds t0 (" + std::to_string(t0) + ")");
        PIXGUIDE_CHECK(t0 <= T, out_of_range, "params: t0 exceeds T = " + std::to_string(T));
        PIXGUIDE_CHECK(s >= 0 && std::isfinite(s), out_of_range, "params: s must be finite and >= 0");
        PIXGUIDE_CHECK(batch >= 1, out_of_range, "params: batch must be >= 1");
    }

    nlohmann::json to_json() const {
        return {{"t0", t0}, {"s", s}, {"n_steps", n_steps}, {"batch", batch}, {"seed", seed}};
    }

    static GuidanceParams from_json(const nlohmann::json& j) {
        GuidanceParams p;
        p.t0 = j.value("t0", p.t0);
        p.s = j.value("s", p.s);
        p.n_steps = j.value("n_steps", p.n_steps);
        p.batch = j.value("batch", p.batch);
        p.seed = j.value("seed", p.seed);
        return p;
    }

    bool operator==(const GuidanceParams&) const = default;
};

struct ParamPreset {
    int t0 = 500;
    double s = 100.0;
};

/// (t0, s) by ROI size. The threshold is stated at `reference_size` and
/// scales with (image_size / reference_size)^2 unless scale_threshold is off.
struct ParamPolicy {
    ParamPreset small{500, 100.0};
    ParamPreset large{750, 40.0};
    double threshold = 5000.0;
    std::size_t reference_size = 256;
    bool scale_threshold = true;
    int n_steps = 50;
    int batch = 4;

    double threshold_at(std::size_t image_size) const {
        if (!scale_threshold) return threshold;
        const double r = static_cast<double>(image_size) / static_cast<double>(reference_size);
        return threshold * r * r;
    }

    /// Settings for 256x256 faces.
    static ParamPolicy faces256() { return {}; }

    /// Settings tuned for the 32x32 toy backbone.
    static ParamPolicy toy() {
        ParamPolicy p;
        p.small = {500, 200.0};
        p.large = {750, 200.0};
        return p;
    }

    nlohmann::json to_json() const {
        return {{"small", {{"t0", small.t0}, {"s", small.s}}},
                {"large", {{"t0", large.t0}, {"s", large.s}}},
                {"threshold", threshold},
                {"reference_size", reference_size},
                {"scale_threshold", scale_threshold},
                {"n_steps", n_steps},
                {"batch", batch}};
    }

    static ParamPolicy from_json(const nlohmann::json& j, ParamPolicy p = toy()) {
        auto preset = [&](const char* k, ParamPreset& pr) {
            if (!j.contains(k)) return;
            pr.t0 = j.at(k).value("t0", pr.t0);
            pr.s = j.at(k).value("s", pr.s);
        };
        preset("small", p.small);
        preset("large", p.large);
        p.threshold = j.value("threshold", p.threshold);
        p.reference_size = j.value("reference_size", p.reference_size);
        p.scale_threshold = j.value("scale_threshold", p.scale_threshold);
        p.n_steps = j.value("n_steps", p.n_steps);
        p.batch = j.value("batch", p.batch);
        return p;
    }
};

/// Small-part preset when the ROI (before dilation) is under the scaled
/// threshold, the large-part preset otherwise.
inline GuidanceParams select_params(const RoiMask& m, const ParamPolicy& policy, std::uint64_t seed = 0) {
    const bool small = static_cast<double>(m.core_count()) < policy.threshold_at(m.width);
    const ParamPreset& p = small ? policy.small : policy.large;
    return {p.t0, p.s, policy.n_steps, policy.batch, seed};
}

}  // namespace pixguide
