// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include "pixguide/data/segmap.hpp"

// JSON wire form of a label map: row-major runs [[label, length], ...].

namespace pixguide {

inline nlohmann::json segmap_to_rle(const SegMap& y) {
    auto runs = nlohmann::json::array();
    for (std::size_t i = 0; i < y.labels.size();) {
        std::size_t j = i;
        while (j < y.labels.size() && y.labels[j] == y.labels[i]) ++j;
        runs.push_back({y.labels[i], j - i});
        i = j;
    }
    return {{"height", y.height}, {"width", y.width}, {"runs", runs}, {"palette", palette_to_json(y.palette)}};
}

inline SegMap segmap_from_rle(const nlohmann::json& j, const Palette& fallback = {}) {
    const std::size_t h = j.at("height"), w = j.at("width");
    std::vector<int> labels;
    labels.reserve(h * w);
    for (const auto& r : j.at("runs")) {
        PIXGUIDE_CHECK(r.is_array() && r.size() == 2, invalid_argument, "rle: runs must be [label, length]");
        const int label = r.at(0);
        const std::size_t len = r.at(1);
        PIXGUIDE_CHECK(labels.size() + len <= h * w, shape_mismatch, "rle: runs exceed map size");
        labels.insert(labels.end(), len, label);
    }
    PIXGUIDE_CHECK(labels.size() == h * w, shape_mismatch, "rle: runs do not cover the map");
    Palette p = j.contains("palette") ? palette_from_json(j.at("palette")) : fallback;
    return SegMap(h, w, std::move(labels), std::move(p));
}

}  // namespace pixguide
