// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>

#include "pixguide/classifier/train.hpp"
#include "pixguide/data/scene.hpp"
#include "pixguide/tensor/checkpoint.hpp"

namespace pixguide {

inline const std::vector<int>& default_multi_steps() {
    static const std::vector<int> steps{50, 150, 250};
    return steps;
}

template <class T>
struct ClassifierBank {
    std::map<int, PixelClassifier<T>> per_t;
    std::optional<PixelClassifier<T>> multi;
    std::vector<int> multi_steps = default_multi_steps();
    Palette palette;

    std::vector<int> trained_ts() const {
        std::vector<int> out;
        for (const auto& [t, _] : per_t) out.push_back(t);
        return out;
    }

    /// G_t at exactly t, else the nearest trained t, ties to the smaller t.
    const PixelClassifier<T>& resolve(int t) const {
        PIXGUIDE_CHECK(!per_t.empty(), missing_artifact, "classifier bank is empty");
        auto hi = per_t.lower_bound(t);
        if (hi == per_t.end()) return std::prev(hi)->second;
        if (hi->first == t || hi == per_t.begin()) return hi->second;
        auto lo = std::prev(hi);
        return (t - lo->first <= hi->first - t) ? lo->second : hi->second;
    }

    int resolve_t(int t) const {
        const auto* g = &resolve(t);
        for (const auto& [k, v] : per_t)
            if (&v == g) return k;
        return -1;
    }

    const PixelClassifier<T>& multi_classifier() const {
        PIXGUIDE_CHECK(multi.has_value(), missing_artifact, "classifier bank has no multi-step classifier");
        return *multi;
    }

    template <class U>
    ClassifierBank<U> cast() const {
        ClassifierBank<U> out;
        for (const auto& [t, g] : per_t) out.per_t.emplace(t, g.template cast<U>());
        if (multi) out.multi = multi->template cast<U>();
        out.multi_steps = multi_steps;
        out.palette = palette;
        return out;
    }

    Checkpoint to_checkpoint() const {
        Checkpoint ck;
        ck.meta()["kind"] = "classifier_bank";
        ck.meta()["trained_ts"] = trained_ts();
        ck.meta()["multi_steps"] = multi_steps;
        ck.meta()["num_classes"] = palette.size();
        ck.meta()["palette"] = palette_to_json(palette);
        ck.meta()["has_multi"] = multi.has_value();
        auto put = [&](const std::string& prefix, const PixelClassifier<T>& g) {
            for (std::size_t i = 0; i < 6; ++i) ck.put(prefix + "." + std::to_string(i), g.parameters()[i]);
        };
        for (const auto& [t, g] : per_t) put("t" + std::to_string(t), g);
        if (multi) put("multi", *multi);
        return ck;
    }

    static ClassifierBank from_checkpoint(const Checkpoint& ck) {
        PIXGUIDE_CHECK(ck.meta().value("kind", "") == "classifier_bank", missing_artifact,
                       "checkpoint is not a classifier bank");
        ClassifierBank b;
        b.multi_steps = ck.meta().at("multi_steps").get<std::vector<int>>();
        b.palette = palette_from_json(ck.meta().at("palette"));
        auto get = [&](const std::string& prefix) {
            std::vector<Tensor<T>> p;
            for (std::size_t i = 0; i < 6; ++i) p.push_back(ck.get<T>(prefix + "." + std::to_string(i)));
            return PixelClassifier<T>(std::move(p));
        };
        for (int t : ck.meta().at("trained_ts").get<std::vector<int>>()) b.per_t.emplace(t, get("t" + std::to_string(t)));
        if (ck.meta().value("has_multi", false)) b.multi = get("multi");
        return b;
    }

    void save(const std::filesystem::path& p) const { to_checkpoint().save(p); }
    static ClassifierBank load(const std::filesystem::path& p) { return from_checkpoint(Checkpoint::load(p)); }
};

/// Called after each classifier is trained with (t or -1 for multi, done, total).
using BankObserver = std::function<void(int, std::size_t, std::size_t)>;

template <class T>
ClassifierBank<T> train_classifier_bank(const std::vector<Tensor<T>>& images, const std::vector<SegMap>& maps,
                                        std::vector<int> ts, const std::vector<int>& multi_steps,
                                        const DiffusionModel<T>& model, const ClassifierTrainConfig& cfg,
                                        const BankObserver& observer = {}) {
    PIXGUIDE_CHECK(!images.empty(), empty_dataset, "classifier bank: no annotated images");
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    ClassifierBank<T> bank;
    bank.palette = maps.front().palette;
    bank.multi_steps = multi_steps;
    const std::size_t total = ts.size() + (multi_steps.empty() ? 0 : 1);
    std::size_t done = 0;
    for (int t : ts) {
        model.sched.check_range(t);
        auto c = cfg;
        c.seed = scene_seed(cfg.seed, static_cast<std::uint64_t>(t));
        bank.per_t.emplace(t, train_pixel_classifier(images, maps, t, model, c));
        if (observer) observer(t, ++done, total);
    }
    if (!multi_steps.empty()) {
        bank.multi = train_multi_classifier(images, maps, multi_steps, model, cfg);
        if (observer) observer(-1, ++done, total);
    }
    return bank;
}

}  // namespace pixguide
