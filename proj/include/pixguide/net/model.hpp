// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "pixguide/diffusion/schedule.hpp"
#include "pixguide/net/unet.hpp"
#include "pixguide/tensor/checkpoint.hpp"

namespace pixguide {

/// A noise estimator together with the schedule it was trained on.
template <class T>
struct DiffusionModel {
    UNet<T> net;
    NoiseSchedule sched;

    const UNetConfig& config() const { return net.config(); }

    /// eps_theta(x_t, t) for t in [1, T].
    Tensor<T> eps(const Tensor<T>& x, int t) const {
        sched.check_range(t);
        return net.forward(x, t).eps;
    }

    UNetOutput<T> forward(const Tensor<T>& x, int t) const {
        sched.check_range(t);
        return net.forward(x, t);
    }

    /// Pixel features [N, d, S, S] of x_t at timestep t.
    Tensor<T> features(const Tensor<T>& x, int t) const {
        return extract_pixel_features(forward(x, t).decoder, config());
    }

    Checkpoint to_checkpoint() const {
        Checkpoint ck;
        ck.meta()["kind"] = "ddpm";
        ck.meta()["unet"] = config().to_json();
        ck.meta()["schedule"] = sched.to_json();
        for (const auto& [name, p] : net.params()) ck.put(name, p);
        return ck;
    }

    static DiffusionModel from_checkpoint(const Checkpoint& ck) {
        PIXGUIDE_CHECK(ck.meta().value("kind", "") == "ddpm", missing_artifact, "checkpoint is not a ddpm model");
        auto cfg = UNetConfig::from_json(ck.meta().at("unet"));
        typename UNet<T>::ParamMap params;
        for (const auto& name : ck.names()) params.emplace(name, ck.get<T>(name));
        return {UNet<T>(cfg, std::move(params)), NoiseSchedule::from_json(ck.meta().at("schedule"))};
    }

    void save(const std::filesystem::path& path, const nlohmann::json& extra_meta = {}) const {
        auto ck = to_checkpoint();
        if (!extra_meta.is_null()) ck.meta()["train"] = extra_meta;
        ck.save(path);
    }

    static DiffusionModel load(const std::filesystem::path& path) { return from_checkpoint(Checkpoint::load(path)); }
};

}  // namespace pixguide
