// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>

#include "pixguide/classifier/bank.hpp"
#include "pixguide/data/metrics.hpp"

namespace pixguide {

/// Seed of the fixed noise used to re-estimate maps of edited images.
inline constexpr std::uint64_t kEvalSeed = 0x5EED0E7A1ull;

/// Re-estimated map of x [3,S,S] via the multi-step classifier, with the
/// noise drawn from `eval_seed`.
template <class T>
SegMap estimate_map(const Tensor<T>& x, const DiffusionModel<T>& model, const ClassifierBank<T>& bank,
                    std::uint64_t eval_seed = kEvalSeed) {
    std::mt19937_64 rng(eval_seed);
    const auto eps = randn<T>(x.shape(), rng);
    return predict_map(bank.multi_classifier(), noisy_features(model, x, bank.multi_steps, eps), bank.palette);
}

/// Fraction of ROI pixels where the re-estimated map of x_edit matches y_edited.
template <class T>
double accuracy_inside(const Tensor<T>& x_edit, const SegMap& y_edited, const RoiMask& m,
                       const DiffusionModel<T>& model, const ClassifierBank<T>& bank,
                       std::uint64_t eval_seed = kEvalSeed) {
    PIXGUIDE_CHECK(m.count() > 0, empty_roi, "accuracy_inside: empty ROI");
    return masked_accuracy(estimate_map(x_edit, model, bank, eval_seed), y_edited, m);
}

}  // namespace pixguide
