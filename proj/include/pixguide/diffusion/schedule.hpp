// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "pixguide/error.hpp"

namespace pixguide {

enum class ScheduleKind { linear };

/// Fixed reverse-step variance: beta_t, or the DDPM
/// posterior variance beta_tilde_t = (1 - abar_{t-1}) / (1 - abar_t) * beta_t.
enum class VarianceKind { beta, beta_tilde };

inline std::string to_string(VarianceKind v) { return v == VarianceKind::beta ? "beta" : "beta_tilde"; }

inline VarianceKind parse_variance_kind(const std::string& s) {
    if (s == "beta") return VarianceKind::beta;
    if (s == "beta_tilde") return VarianceKind::beta_tilde;
    throw Error(ErrorCode::invalid_argument, "unknown variance kind " + s);
}

/// Diffusion coefficients indexed by timestep t in [1, T]. alpha_bar(0) is
/// defined as 1 (the clean image).
class NoiseSchedule {
public:
    NoiseSchedule() = default;

    NoiseSchedule(std::vector<double> betas, VarianceKind variance = VarianceKind::beta_tilde)
        : beta_(std::move(betas)), variance_(variance) {
        PIXGUIDE_CHECK(!beta_.empty(), invalid_argument, "schedule needs at least one step");
        double prod = 1.0;
        for (double b : beta_) {
            PIXGUIDE_CHECK(b > 0.0 && b < 1.0, out_of_range, "beta must lie in (0, 1)");
            alpha_.push_back(1.0 - b);
            prod *= 1.0 - b;
            alpha_bar_.push_back(prod);
        }
        for (int t = 1; t <= steps(); ++t) sigma_.push_back(std::sqrt(variance_at(t)));
    }

    int steps() const { return static_cast<int>(beta_.size()); }
    VarianceKind variance_kind() const { return variance_; }

    double beta(int t) const { return beta_.at(index(t)); }
    double alpha(int t) const { return alpha_.at(index(t)); }
    double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bar_.at(index(t)); }
    /// Reverse-step noise scale sigma_t.
    double sigma(int t) const { return sigma_.at(index(t)); }

    /// Signal-to-noise ratio abar_t / (1 - abar_t).
    double snr(int t) const {
        check_range(t);
        const double ab = alpha_bar(t);
        return ab / (1.0 - ab);
    }

    void check_range(int t) const {
        if (t < 1 || t > steps())
            throw Error(ErrorCode::out_of_range,
                        "timestep " + std::to_string(t) + " outside [1, " + std::to_string(steps()) + "]");
    }

    const std::vector<double>& betas() const { return beta_; }

    nlohmann::json to_json() const { return {{"betas", beta_}, {"variance", to_string(variance_)}}; }

    static NoiseSchedule from_json(const nlohmann::json& j) {
        return NoiseSchedule(j.at("betas").get<std::vector<double>>(),
                             parse_variance_kind(j.value("variance", std::string("beta_tilde"))));
    }

private:
    std::size_t index(int t) const {
        check_range(t);
        return static_cast<std::size_t>(t - 1);
    }

    double variance_at(int t) const {
        if (variance_ == VarianceKind::beta) return beta(t);
        return (1.0 - alpha_bar(t - 1)) / (1.0 - alpha_bar(t)) * beta(t);
    }

    std::vector<double> beta_, alpha_, alpha_bar_, sigma_;
    VarianceKind variance_ = VarianceKind::beta_tilde;
};

inline NoiseSchedule build_schedule(int steps, double beta_start, double beta_end, ScheduleKind kind = ScheduleKind::linear,
                                    VarianceKind variance = VarianceKind::beta_tilde) {
    PIXGUIDE_CHECK(steps >= 1, out_of_range, "schedule needs T >= 1");
    PIXGUIDE_CHECK(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0, out_of_range,
                   "schedule needs 0 < beta_start <= beta_end < 1");
    std::vector<double> betas(static_cast<std::size_t>(steps));
    switch (kind) {
        case ScheduleKind::linear:
            for (int i = 0; i < steps; ++i)
                betas[static_cast<std::size_t>(i)] =
                    steps == 1 ? beta_start : beta_start + (beta_end - beta_start) * i / (steps - 1);
            break;
    }
    return NoiseSchedule(std::move(betas), variance);
}

/// Default schedule of the toy backbone.
inline NoiseSchedule default_schedule(int steps = 1000) { return build_schedule(steps, 1e-4, 0.02); }

/// A strided subsequence of timesteps. Coefficients between retained steps
/// are derived from the base alpha_bar so products over skipped steps
/// telescope exactly.
class RespacedSchedule {
public:
    RespacedSchedule(NoiseSchedule base, std::vector<int> steps) : base_(std::move(base)), steps_(std::move(steps)) {
        PIXGUIDE_CHECK(!steps_.empty(), invalid_argument, "respaced grid is empty");
        for (std::size_t i = 0; i < steps_.size(); ++i) {
            base_.check_range(steps_[i]);
            PIXGUIDE_CHECK(i == 0 || steps_[i] > steps_[i - 1], invalid_argument, "respaced grid must increase");
        }
    }

    const NoiseSchedule& base() const { return base_; }
    const std::vector<int>& steps() const { return steps_; }
    int size() const { return static_cast<int>(steps_.size()); }
    int last() const { return steps_.back(); }

    /// Timestep preceding grid position i (0 before the first retained step).
    int prev(std::size_t i) const { return i == 0 ? 0 : steps_.at(i - 1); }

    double alpha_bar(int t) const { return base_.alpha_bar(t); }

    /// Effective beta for the jump prev(i) -> steps[i].
    double beta(std::size_t i) const {
        const int t = steps_.at(i);
        if (prev(i) == t - 1) return base_.beta(t);
        return 1.0 - base_.alpha_bar(t) / base_.alpha_bar(prev(i));
    }

    /// Reverse-step variance for the jump steps[i] -> prev(i).
    double variance(std::size_t i) const {
        const double b = beta(i);
        if (base_.variance_kind() == VarianceKind::beta) return b;
        return (1.0 - alpha_bar(prev(i))) / (1.0 - alpha_bar(steps_.at(i))) * b;
    }

private:
    NoiseSchedule base_;
    std::vector<int> steps_;
};

/// Near-uniform grid of n_steps timesteps ending exactly at t0:
/// steps[i] = round((i + 1) * t0 / n_steps).
inline RespacedSchedule respace(const NoiseSchedule& sched, int n_steps, int t0) {
    PIXGUIDE_CHECK(n_steps >= 1, out_of_range, "respace: n_steps must be >= 1");
    PIXGUIDE_CHECK(n_steps <= t0, out_of_range, "respace: n_steps exceeds t0");
    PIXGUIDE_CHECK(t0 <= sched.steps(), out_of_range, "respace: t0 exceeds T");
    std::vector<int> steps(static_cast<std::size_t>(n_steps));
    for (int i = 1; i <= n_steps; ++i) {
        const long num = static_cast<long>(i) * t0;
        steps[static_cast<std::size_t>(i - 1)] = static_cast<int>((2 * num + n_steps) / (2L * n_steps));
    }
    return RespacedSchedule(sched, std::move(steps));
}

}  // namespace pixguide
