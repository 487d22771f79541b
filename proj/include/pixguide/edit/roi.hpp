// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <set>
#include <vector>

#include "pixguide/data/segmap.hpp"

namespace pixguide {

/// One pass of 3x3 square dilation.
inline std::vector<std::uint8_t> dilate3x3(const std::vector<std::uint8_t>& in, std::size_t h, std::size_t w) {
    std::vector<std::uint8_t> out(in.size(), 0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            if (!in[y * w + x]) continue;
            for (std::size_t yy = y ? y - 1 : 0; yy <= std::min(h - 1, y + 1); ++yy)
                for (std::size_t xx = x ? x - 1 : 0; xx <= std::min(w - 1, x + 1); ++xx) out[yy * w + xx] = 1;
        }
    return out;
}

/// m = 1 where y or y_edited carries a class in q_edit, then dilated by
/// `dilation` passes of a 3x3 square.
inline RoiMask build_roi_mask(const SegMap& y, const SegMap& y_edited, const std::vector<int>& q_edit,
                              int dilation = 3) {
    PIXGUIDE_CHECK(y.height == y_edited.height && y.width == y_edited.width, shape_mismatch,
                   "roi: maps differ in size");
    PIXGUIDE_CHECK(!q_edit.empty(), invalid_argument, "roi: q_edit is empty");
    PIXGUIDE_CHECK(dilation >= 0, invalid_argument, "roi: negative dilation");
    const std::set<int> q(q_edit.begin(), q_edit.end());
    RoiMask m{y.height, y.width, {}, std::vector<std::uint8_t>(y.size(), 0)};
    for (std::size_t i = 0; i < y.size(); ++i) m.core[i] = q.count(y.labels[i]) || q.count(y_edited.labels[i]);
    m.bits = m.core;
    for (int k = 0; k < dilation; ++k) m.bits = dilate3x3(m.bits, m.height, m.width);
    return m;
}

/// Classes whose labels differ between the two maps.
inline std::vector<int> changed_classes(const SegMap& y, const SegMap& y_edited) {
    std::set<int> s;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y.labels[i] != y_edited.labels[i]) {
            s.insert(y.labels[i]);
            s.insert(y_edited.labels[i]);
        }
    return {s.begin(), s.end()};
}

}  // namespace pixguide
