// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <random>
#include <sstream>

#include "pixguide/edit/guided.hpp"

namespace pixguide {

enum class Selection { quantitative, random };

inline Selection parse_selection(const std::string& s) {
    if (s == "quantitative") return Selection::quantitative;
    if (s == "random") return Selection::random;
    throw Error(ErrorCode::invalid_argument, "unknown selection strategy " + s);
}

/// Index of the chosen candidate. Quantitative: highest accuracy_inside,
/// then lowest MAE_outside, then lowest index. Random: uniform over the
/// candidates that did not fail.
template <class T>
std::size_t select_candidate(const EditResult<T>& r, Selection how, std::uint64_t seed = 0) {
    std::vector<std::size_t> ok;
    for (std::size_t b = 0; b < r.candidates.size(); ++b)
        if (!r.candidates[b].failed) ok.push_back(b);
    PIXGUIDE_CHECK(!ok.empty(), divergence, "every candidate failed");
    if (how == Selection::random) {
        std::mt19937_64 rng(seed);
        return ok[std::uniform_int_distribution<std::size_t>(0, ok.size() - 1)(rng)];
    }
    auto key = [&](std::size_t b) {
        const auto& m = r.candidates[b].metrics;
        const double acc = std::isnan(m.accuracy_inside) ? -1.0 : m.accuracy_inside;
        const double mae = std::isnan(m.mae_outside) ? 0.0 : m.mae_outside;
        return std::pair{-acc, mae};
    };
    std::size_t best = ok.front();
    for (std::size_t b : ok)
        if (key(b) < key(best)) best = b;
    return best;
}

inline nlohmann::json metric_json(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline nlohmann::json metrics_to_json(const CandidateMetrics& m) {
    return {{"mae_outside", metric_json(m.mae_outside)},
            {"mae_outside_x1e3", metric_json(m.mae_outside * 1e3)},
            {"psnr_outside", metric_json(m.psnr_outside)},
            {"accuracy_inside", metric_json(m.accuracy_inside)}};
}

inline nlohmann::json trace_to_json(const std::vector<TracePoint>& tr) {
    auto a = nlohmann::json::array();
    for (const auto& p : tr) a.push_back({{"t", p.t}, {"snr", p.snr}, {"accuracy", p.accuracy}});
    return a;
}

/// Trace as CSV with header t,snr,accuracy.
inline std::string trace_to_csv(const std::vector<TracePoint>& tr) {
    std::ostringstream os;
    os.precision(10);
    os << "t,snr,accuracy\n";
    for (const auto& p : tr) os << p.t << ',' << p.snr << ',' << p.accuracy << '\n';
    return os.str();
}

/// JSON form of a result. `image_ref` maps a candidate image to the
/// reference stored in its place (typically a content hash).
template <class T>
nlohmann::json edit_result_to_json(const EditResult<T>& r, const std::function<std::string(const Tensor<T>&)>& image_ref) {
    auto cands = nlohmann::json::array();
    for (const auto& c : r.candidates) {
        nlohmann::json j{{"failed", c.failed}, {"metrics", metrics_to_json(c.metrics)}, {"trace", trace_to_json(c.trace)}};
        if (c.failed) j["error"] = c.error;
        else j["image"] = image_ref(c.image);
        cands.push_back(std::move(j));
    }
    return {{"params", r.params.to_json()}, {"candidates", cands}};
}

}  // namespace pixguide
