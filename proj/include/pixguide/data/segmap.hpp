// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "pixguide/error.hpp"

namespace pixguide {

struct ClassInfo {
    std::string name;
    std::array<std::uint8_t, 3> color{};
};

using Palette = std::vector<ClassInfo>;

inline nlohmann::json palette_to_json(const Palette& p) {
    auto out = nlohmann::json::array();
    for (std::size_t i = 0; i < p.size(); ++i)
        out.push_back({{"id", i}, {"name", p[i].name}, {"color", p[i].color}});
    return out;
}

inline Palette palette_from_json(const nlohmann::json& j) {
    Palette p(j.size());
    for (const auto& e : j) {
        const std::size_t id = e.at("id");
        PIXGUIDE_CHECK(id < p.size(), invalid_argument, "palette ids must be dense");
        p[id] = {e.at("name"), e.at("color").get<std::array<std::uint8_t, 3>>()};
    }
    return p;
}

/// Per-pixel class labels, row-major.
struct SegMap {
    std::size_t height = 0, width = 0;
    std::vector<int> labels;
    Palette palette;

    SegMap() = default;
    SegMap(std::size_t h, std::size_t w, std::vector<int> l, Palette p)
        : height(h), width(w), labels(std::move(l)), palette(std::move(p)) {
        validate();
    }

    std::size_t size() const { return labels.size(); }
    int num_classes() const { return static_cast<int>(palette.size()); }
    int at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
    int& at(std::size_t y, std::size_t x) { return labels[y * width + x]; }

    std::size_t count(int cls) const {
        std::size_t n = 0;
        for (int v : labels) n += v == cls;
        return n;
    }

    void validate() const {
        PIXGUIDE_CHECK(labels.size() == height * width, shape_mismatch, "segmap: label count does not match size");
        PIXGUIDE_CHECK(!palette.empty(), invalid_argument, "segmap: empty palette");
        for (int v : labels)
            PIXGUIDE_CHECK(v >= 0 && v < num_classes(), out_of_range, "segmap: label " + std::to_string(v) + " out of range");
    }

    int class_id(const std::string& name) const {
        for (std::size_t i = 0; i < palette.size(); ++i)
            if (palette[i].name == name) return static_cast<int>(i);
        throw Error(ErrorCode::invalid_argument, "unknown class " + name);
    }

    bool operator==(const SegMap& o) const {
        return height == o.height && width == o.width && labels == o.labels;
    }
};

/// Binary edit region. `core` is the undilated region, `bits` the dilated one.
struct RoiMask {
    std::size_t height = 0, width = 0;
    std::vector<std::uint8_t> bits;
    std::vector<std::uint8_t> core;

    std::size_t size() const { return bits.size(); }
    bool operator()(std::size_t y, std::size_t x) const { return bits[y * width + x] != 0; }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto b : bits) n += b != 0;
        return n;
    }

    std::size_t core_count() const {
        std::size_t n = 0;
        for (auto b : core) n += b != 0;
        return n;
    }

    static RoiMask filled(std::size_t h, std::size_t w, bool on) {
        return {h, w, std::vector<std::uint8_t>(h * w, on), std::vector<std::uint8_t>(h * w, on)};
    }
};

}  // namespace pixguide
