// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "pixguide/data/benchmark.hpp"
#include "pixguide/service/pipeline.hpp"

namespace pixguide {

struct BenchmarkConfig {
    std::size_t n = 50;
    std::uint64_t seed = 0;  // edit list and sampler seeds
    ParamPolicy policy = ParamPolicy::toy();
    int batch = 4;
    std::uint64_t selection_seed = 0;
    GuidanceOptions options;
};

struct BenchmarkRow {
    std::size_t image = 0;
    std::string edit;
    std::size_t roi_pixels = 0;
    GuidanceParams params;
    CandidateMetrics quantitative, random;
    double seconds = 0;
    bool skipped = false;
    std::string reason;
};

struct MetricSummary {
    double mean = 0, std = 0;
    std::size_t n = 0;
};

inline MetricSummary summarize(const std::vector<double>& v) {
    MetricSummary s;
    s.n = v.size();
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    for (double x : v) s.std += (x - s.mean) * (x - s.mean);
    s.std = v.size() > 1 ? std::sqrt(s.std / static_cast<double>(v.size() - 1)) : 0.0;
    return s;
}

struct BenchmarkReport {
    std::vector<BenchmarkRow> rows;

    /// Column over non-skipped rows; which in {"mae_x1e3", "psnr", "accuracy", "runtime"}.
    std::vector<double> column(Selection sel, const std::string& which) const {
        std::vector<double> out;
        for (const auto& r : rows) {
            if (r.skipped) continue;
            const auto& m = sel == Selection::quantitative ? r.quantitative : r.random;
            if (which == "mae_x1e3") out.push_back(m.mae_outside * 1e3);
            else if (which == "psnr") out.push_back(m.psnr_outside);
            else if (which == "accuracy") out.push_back(m.accuracy_inside);
            else if (which == "runtime") out.push_back(r.seconds);
            else throw Error(ErrorCode::invalid_argument, "unknown report column " + which);
        }
        return out;
    }

    MetricSummary summary(Selection sel, const std::string& which) const { return summarize(column(sel, which)); }

    nlohmann::json to_json() const {
        auto rows_j = nlohmann::json::array();
        for (const auto& r : rows) {
            nlohmann::json j{{"image", r.image}, {"edit", r.edit}, {"skipped", r.skipped}};
            if (r.skipped) {
                j["reason"] = r.reason;
            } else {
                j["roi_pixels"] = r.roi_pixels;
                j["params"] = r.params.to_json();
                j["quantitative"] = metrics_to_json(r.quantitative);
                j["random"] = metrics_to_json(r.random);
                j["runtime_s"] = r.seconds;
            }
            rows_j.push_back(std::move(j));
        }
        nlohmann::json table;
        for (auto sel : {Selection::quantitative, Selection::random}) {
            nlohmann::json t;
            for (const char* c : {"mae_x1e3", "psnr", "accuracy", "runtime"}) {
                const auto s = summary(sel, c);
                t[c] = {{"mean", metric_json(s.mean)}, {"std", metric_json(s.std)}, {"n", s.n}};
            }
            table[sel == Selection::quantitative ? "quantitative" : "random"] = t;
        }
        return {{"rows", rows_j}, {"table", table}};
    }
};

/// Scripted edits on test scenes: image i gets the i-th sampled edit on its
/// ground-truth map, parameters from the policy, and both selection
/// strategies are scored on the same candidate batch.
inline BenchmarkReport eval_benchmark(const Split& test, const Artifacts& a, const BenchmarkConfig& cfg,
                                      const std::function<void(std::size_t, std::size_t)>& progress = {}) {
    BenchmarkReport rep;
    if (cfg.n == 0) return rep;
    PIXGUIDE_CHECK(test.size() > 0, empty_dataset, "benchmark: test split is empty");
    a.bank.multi_classifier();
    const auto edits = sample_benchmark_edits(cfg.n, cfg.seed);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        BenchmarkRow row;
        row.image = i % test.size();
        row.edit = edits[i].name();
        const auto& y = test.labels[row.image];
        try {
            const auto ye = apply_benchmark_edit(y, edits[i]);
            const auto m = build_roi_mask(y, ye, edits[i].q_edit());
            PIXGUIDE_CHECK(m.count() > 0, empty_roi, "empty ROI");
            row.roi_pixels = m.core_count();
            row.params = select_params(m, cfg.policy, scene_seed(cfg.seed, 1000 + i));
            row.params.batch = cfg.batch;
            const auto start = std::chrono::steady_clock::now();
            const auto res = guided_sample(test.images[row.image], ye, m, row.params, a.model, a.bank, cfg.options);
            row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            row.quantitative = res.candidates[select_candidate(res, Selection::quantitative)].metrics;
            row.random = res.candidates[select_candidate(res, Selection::random, scene_seed(cfg.selection_seed, i))].metrics;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::invalid_argument && e.code() != ErrorCode::empty_roi &&
                e.code() != ErrorCode::divergence)
                throw;
            row.skipped = true;
            row.reason = e.what();
        }
        rep.rows.push_back(std::move(row));
        if (progress) progress(i + 1, cfg.n);
    }
    return rep;
}

}  // namespace pixguide
