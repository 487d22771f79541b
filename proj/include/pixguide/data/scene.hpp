// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "pixguide/data/segmap.hpp"
#include "pixguide/tensor/tensor.hpp"

// Procedural cartoon faces with exact per-pixel labels. Geometry ranges are
// given on a 32-pixel canvas and scaled to image_size.

namespace pixguide {

enum SceneClass : int { background = 0, face = 1, eye_left = 2, eye_right = 3, mouth = 4, hair = 5 };

inline Palette default_palette() {
    return {{"background", {40, 60, 120}}, {"face", {230, 180, 140}}, {"eye_left", {30, 30, 200}},
            {"eye_right", {30, 200, 30}},  {"mouth", {200, 30, 40}},  {"hair", {90, 50, 20}}};
}

struct Range {
    double lo = 0, hi = 0;
};

inline void to_json(nlohmann::json& j, const Range& r) { j = {r.lo, r.hi}; }
inline void from_json(const nlohmann::json& j, Range& r) {
    r.lo = j.at(0);
    r.hi = j.at(1);
}

struct SceneSpec {
    std::size_t image_size = 32;
    Range face_cx{14.5, 17.5}, face_cy{15.5, 18.0}, face_rx{8.5, 10.5}, face_ry{9.5, 11.5};
    Range hair_thickness{1.5, 3.5};
    Range eye_dx{3.2, 4.6}, eye_dy{2.0, 3.5}, eye_r{1.4, 2.3}, eye_aspect{0.8, 1.1};
    Range mouth_dy{4.0, 6.0}, mouth_rx{2.5, 4.0}, mouth_ry{0.8, 2.2};
    Range shading{-0.12, 0.12};

    static constexpr double kCanvas = 32.0;

    void validate() const {
        PIXGUIDE_CHECK(image_size >= 8, invalid_argument, "scene: image_size too small");
        for (const Range* r : {&face_cx, &face_cy, &face_rx, &face_ry, &hair_thickness, &eye_dx, &eye_dy, &eye_r,
                               &eye_aspect, &mouth_dy, &mouth_rx, &mouth_ry, &shading})
            PIXGUIDE_CHECK(r->lo <= r->hi, invalid_argument, "scene: range with lo > hi");
        const double reach_x = face_rx.hi + hair_thickness.hi, reach_y = face_ry.hi + hair_thickness.hi;
        PIXGUIDE_CHECK(face_cx.lo - reach_x >= 0 && face_cx.hi + reach_x <= kCanvas && face_cy.lo - reach_y >= 0 &&
                           face_cy.hi + face_ry.hi <= kCanvas,
                       invalid_argument, "scene: parts may extend outside the canvas");
        PIXGUIDE_CHECK(face_rx.lo > 0 && face_ry.lo > 0 && eye_r.lo > 0 && mouth_rx.lo > 0 && mouth_ry.lo > 0,
                       invalid_argument, "scene: part sizes must be positive");
    }

    nlohmann::json to_json() const {
        return {{"image_size", image_size}, {"face_cx", face_cx},   {"face_cy", face_cy},
                {"face_rx", face_rx},       {"face_ry", face_ry},   {"hair_thickness", hair_thickness},
                {"eye_dx", eye_dx},         {"eye_dy", eye_dy},     {"eye_r", eye_r},
                {"eye_aspect", eye_aspect}, {"mouth_dy", mouth_dy}, {"mouth_rx", mouth_rx},
                {"mouth_ry", mouth_ry},     {"shading", shading}};
    }

    static SceneSpec from_json(const nlohmann::json& j) {
        SceneSpec s;
        s.image_size = j.value("image_size", s.image_size);
        auto rd = [&](const char* k, Range& r) {
            if (j.contains(k)) r = j.at(k).get<Range>();
        };
        rd("face_cx", s.face_cx);
        rd("face_cy", s.face_cy);
        rd("face_rx", s.face_rx);
        rd("face_ry", s.face_ry);
        rd("hair_thickness", s.hair_thickness);
        rd("eye_dx", s.eye_dx);
        rd("eye_dy", s.eye_dy);
        rd("eye_r", s.eye_r);
        rd("eye_aspect", s.eye_aspect);
        rd("mouth_dy", s.mouth_dy);
        rd("mouth_rx", s.mouth_rx);
        rd("mouth_ry", s.mouth_ry);
        rd("shading", s.shading);
        s.validate();
        return s;
    }
};

struct Ellipse {
    double cx = 0, cy = 0, rx = 1, ry = 1;
    bool contains(double x, double y) const {
        const double u = (x - cx) / rx, v = (y - cy) / ry;
        return u * u + v * v <= 1.0;
    }
};

/// Sampled scene parameters, in 32-canvas units.
struct SceneGeometry {
    Ellipse face, hair, eye_l, eye_r, mouth;
    double hair_cut = 0;  // hair only above this row
    std::array<std::array<double, 3>, 6> color{};
    double shading = 0;
};

/// Deterministic uniform source independent of the standard library's
/// distribution implementations.
class SceneRng {
public:
    explicit SceneRng(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(const Range& r) { return r.lo + (r.hi - r.lo) * uniform(); }

private:
    std::uint64_t state_;
};

/// Seed of the i-th scene of a dataset.
inline std::uint64_t scene_seed(std::uint64_t base, std::uint64_t i) {
    SceneRng r(base ^ (0xD1B54A32D192ED03ull * (i + 1)));
    return r.next();
}

inline SceneGeometry sample_geometry(const SceneSpec& spec, std::uint64_t seed) {
    spec.validate();
    SceneRng r(seed);
    SceneGeometry g;
    g.face = {r.uniform(spec.face_cx), r.uniform(spec.face_cy), r.uniform(spec.face_rx), r.uniform(spec.face_ry)};
    const double th = r.uniform(spec.hair_thickness);
    g.hair = {g.face.cx, g.face.cy - 0.5, g.face.rx + th, g.face.ry + th};
    g.hair_cut = g.face.cy - 0.2 * g.face.ry;
    const double dx = r.uniform(spec.eye_dx), dy = r.uniform(spec.eye_dy);
    const double er = r.uniform(spec.eye_r), ea = r.uniform(spec.eye_aspect);
    g.eye_l = {g.face.cx - dx, g.face.cy - dy, er, er * ea};
    g.eye_r = {g.face.cx + dx, g.face.cy - dy, er, er * ea};
    g.mouth = {g.face.cx, g.face.cy + r.uniform(spec.mouth_dy), r.uniform(spec.mouth_rx), r.uniform(spec.mouth_ry)};

    g.color[background] = {r.uniform({-0.9, 0.2}), r.uniform({-0.6, 0.6}), r.uniform({-0.2, 0.9})};
    g.color[face] = {r.uniform({0.35, 0.85}), r.uniform({-0.05, 0.45}), r.uniform({-0.35, 0.15})};
    const double e = r.uniform({-0.95, -0.55});
    g.color[eye_left] = g.color[eye_right] = {e, e, std::min(1.0, e + r.uniform({0.0, 0.4}))};
    g.color[mouth] = {r.uniform({0.2, 0.7}), r.uniform({-0.85, -0.45}), r.uniform({-0.75, -0.35})};
    const double h = r.uniform({-0.9, 0.3});
    g.color[hair] = {std::min(1.0, h + 0.15), h, std::max(-1.0, h - 0.15)};
    g.shading = r.uniform(spec.shading);
    return g;
}

/// Label of the pixel whose center is (x, y) in 32-canvas units. Later
/// parts sit on top of earlier ones.
inline int label_at(const SceneGeometry& g, double x, double y) {
    int l = background;
    if (g.hair.contains(x, y) && y < g.hair_cut) l = hair;
    if (g.face.contains(x, y)) {
        l = face;
        if (g.eye_l.contains(x, y)) l = eye_left;
        if (g.eye_r.contains(x, y)) l = eye_right;
        if (g.mouth.contains(x, y)) l = mouth;
    }
    return l;
}

inline double quantize8(double v) {
    v = std::clamp(v, -1.0, 1.0);
    return std::round((v + 1.0) * 127.5) / 127.5 - 1.0;
}

template <class T = double>
struct Scene {
    Tensor<T> image;  // [3, S, S] in [-1, 1], on the 8-bit grid
    SegMap labels;
    SceneGeometry geometry;
};

template <class T = double>
Scene<T> render_scene(const SceneGeometry& g, std::size_t size) {
    const double k = SceneSpec::kCanvas / static_cast<double>(size);
    std::vector<int> labels(size * size);
    std::vector<T> img(3 * size * size);
    for (std::size_t py = 0; py < size; ++py)
        for (std::size_t px = 0; px < size; ++px) {
            const double x = (px + 0.5) * k, y = (py + 0.5) * k;
            const int l = label_at(g, x, y);
            labels[py * size + px] = l;
            double shade = 0;
            if (l == face) shade = g.shading * (y - g.face.cy) / g.face.ry;
            if (l == background) shade = 0.1 * (x / SceneSpec::kCanvas - 0.5);
            for (std::size_t c = 0; c < 3; ++c)
                img[(c * size + py) * size + px] = static_cast<T>(quantize8(g.color[l][c] + shade));
        }
    return {Tensor<T>(Shape{3, size, size}, std::move(img)), SegMap(size, size, std::move(labels), default_palette()), g};
}

template <class T = double>
Scene<T> generate_scene(const SceneSpec& spec, std::uint64_t seed) {
    return render_scene<T>(sample_geometry(spec, seed), spec.image_size);
}

}  // namespace pixguide
