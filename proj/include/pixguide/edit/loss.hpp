// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pixguide/classifier/mlp.hpp"
#include "pixguide/tensor/ops.hpp"

namespace pixguide {

/// Indices of the pixels with m = 1.
inline std::vector<std::size_t> roi_pixels(const RoiMask& m) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < m.bits.size(); ++i)
        if (m.bits[i]) idx.push_back(i);
    return idx;
}

/// Masked segmentation loss: mean over ROI pixels of the cross-entropy of
/// G(z_ij) against y_edited_ij. features [1, d, H, W]; differentiable to the
/// features.
template <class T>
Tensor<T> seg_loss(const Tensor<T>& features, const SegMap& y_edited, const RoiMask& m, const PixelClassifier<T>& g) {
    PIXGUIDE_CHECK(features.rank() == 4 && features.dim(0) == 1, shape_mismatch,
                   "seg_loss: expected features [1, d, H, W], got " + to_string(features.shape()));
    PIXGUIDE_CHECK(features.dim(2) == m.height && features.dim(3) == m.width && y_edited.height == m.height &&
                       y_edited.width == m.width,
                   shape_mismatch, "seg_loss: features, map and mask sizes differ");
    auto idx = roi_pixels(m);
    PIXGUIDE_CHECK(!idx.empty(), empty_roi, "seg_loss: empty ROI");
    std::vector<int> labels(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) labels[k] = y_edited.labels[idx[k]];
    return softmax_cross_entropy(g.logits(gather_rows(pixel_rows(features), std::move(idx))), labels);
}

}  // namespace pixguide
