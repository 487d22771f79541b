// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "pixguide/data/segmap.hpp"
#include "pixguide/tensor/tensor.hpp"

namespace pixguide {

/// PSNR reported for identical inputs, and the upper cap in general.
inline constexpr double kPsnrCap = 99.0;
/// Peak-to-peak range of model space [-1, 1].
inline constexpr double kPsnrPeak = 2.0;

namespace detail {

/// Visits every (image element, outside-mask) pair of x [C,H,W] or [1,C,H,W].
template <class T, class Fn>
std::size_t for_each_outside(const Tensor<T>& x, const Tensor<T>& x_edit, const RoiMask& m, Fn&& fn) {
    PIXGUIDE_CHECK(x.shape() == x_edit.shape(), shape_mismatch, "metric: image shapes differ");
    const std::size_t plane = m.height * m.width;
    PIXGUIDE_CHECK(plane > 0 && x.size() % plane == 0, shape_mismatch, "metric: mask does not match image");
    std::size_t n = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (m.bits[i % plane]) continue;
        fn(static_cast<double>(x[i]), static_cast<double>(x_edit[i]));
        ++n;
    }
    PIXGUIDE_CHECK(n > 0, empty_roi, "metric: mask leaves no outside pixels");
    return n;
}

}  // namespace detail

/// Mean absolute error over pixels outside the mask (all channels).
template <class T>
double mae_outside(const Tensor<T>& x, const Tensor<T>& x_edit, const RoiMask& m) {
    double acc = 0;
    const auto n = detail::for_each_outside(x, x_edit, m, [&](double a, double b) { acc += std::abs(a - b); });
    return acc / static_cast<double>(n);
}

/// PSNR over pixels outside the mask with peak = 2, capped at kPsnrCap.
template <class T>
double psnr_outside(const Tensor<T>& x, const Tensor<T>& x_edit, const RoiMask& m) {
    double acc = 0;
    const auto n = detail::for_each_outside(x, x_edit, m, [&](double a, double b) { acc += (a - b) * (a - b); });
    const double mse = acc / static_cast<double>(n);
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(kPsnrPeak * kPsnrPeak / mse));
}

/// Fraction of masked pixels where `predicted` equals `target`.
inline double masked_accuracy(const SegMap& predicted, const SegMap& target, const RoiMask& m) {
    PIXGUIDE_CHECK(predicted.labels.size() == target.labels.size() && target.labels.size() == m.bits.size(),
                   shape_mismatch, "accuracy: map sizes differ");
    std::size_t hit = 0, n = 0;
    for (std::size_t i = 0; i < m.bits.size(); ++i) {
        if (!m.bits[i]) continue;
        ++n;
        hit += predicted.labels[i] == target.labels[i];
    }
    PIXGUIDE_CHECK(n > 0, empty_roi, "accuracy: empty ROI");
    return static_cast<double>(hit) / static_cast<double>(n);
}

}  // namespace pixguide
