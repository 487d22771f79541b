// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdlib>
#include <set>
#include <string>
#include <vector>

#include "pixguide/data/scene.hpp"

// Scripted label-map edits used by the benchmark. All edits act on the map
// only; pixels are never moved outside the face unless the edit says so.

namespace pixguide {

enum class EditKind { move_eyes, open_mouth, close_mouth, enlarge_part, remove_part };

inline std::string to_string(EditKind k) {
    switch (k) {
        case EditKind::move_eyes: return "move_eyes";
        case EditKind::open_mouth: return "open_mouth";
        case EditKind::close_mouth: return "close_mouth";
        case EditKind::enlarge_part: return "enlarge_part";
        case EditKind::remove_part: return "remove_part";
    }
    return "?";
}

inline EditKind parse_edit_kind(const std::string& s) {
    for (auto k : {EditKind::move_eyes, EditKind::open_mouth, EditKind::close_mouth, EditKind::enlarge_part,
                   EditKind::remove_part})
        if (to_string(k) == s) return k;
    throw Error(ErrorCode::invalid_argument, "unknown benchmark edit " + s);
}

struct BenchmarkEdit {
    EditKind kind = EditKind::move_eyes;
    int dx = 0, dy = 0;  // move_eyes offset in pixels
    int amount = 1;      // open_mouth / enlarge_part growth in pixels
    int target = mouth;  // enlarge_part / remove_part class

    /// Classes whose pixels may change.
    std::vector<int> q_edit() const {
        switch (kind) {
            case EditKind::move_eyes: return {eye_left, eye_right};
            case EditKind::open_mouth:
            case EditKind::close_mouth: return {mouth};
            case EditKind::enlarge_part:
            case EditKind::remove_part: return {target};
        }
        return {};
    }

    std::string name() const {
        std::string n = to_string(kind);
        if (kind == EditKind::move_eyes) n += "(" + std::to_string(dx) + "," + std::to_string(dy) + ")";
        if (kind == EditKind::open_mouth) n += "(" + std::to_string(amount) + ")";
        if (kind == EditKind::enlarge_part)
            n += "(" + default_palette()[static_cast<std::size_t>(target)].name + "," + std::to_string(amount) + ")";
        if (kind == EditKind::remove_part) n += "(" + default_palette()[static_cast<std::size_t>(target)].name + ")";
        return n;
    }

    nlohmann::json to_json() const {
        return {{"kind", to_string(kind)}, {"dx", dx}, {"dy", dy}, {"amount", amount}, {"target", target}};
    }

    static BenchmarkEdit from_json(const nlohmann::json& j) {
        BenchmarkEdit e;
        e.kind = parse_edit_kind(j.at("kind"));
        e.dx = j.value("dx", 0);
        e.dy = j.value("dy", 0);
        e.amount = j.value("amount", 1);
        e.target = j.value("target", static_cast<int>(mouth));
        return e;
    }
};

namespace detail {

/// Class a part grows into or is replaced by: skin for facial features, background otherwise.
inline int host_class(int cls) { return (cls == eye_left || cls == eye_right || cls == mouth) ? face : background; }

inline void require_present(const SegMap& y, int cls, const char* what) {
    PIXGUIDE_CHECK(y.count(cls) > 0, invalid_argument,
                   std::string(what) + ": class " + y.palette.at(static_cast<std::size_t>(cls)).name + " is absent");
}

}  // namespace detail

inline SegMap apply_benchmark_edit(const SegMap& y, const BenchmarkEdit& e) {
    SegMap out = y;
    const long h = static_cast<long>(y.height), w = static_cast<long>(y.width);
    auto in = [&](long r, long c) { return r >= 0 && r < h && c >= 0 && c < w; };
    switch (e.kind) {
        case EditKind::move_eyes: {
            PIXGUIDE_CHECK(y.count(eye_left) + y.count(eye_right) > 0, invalid_argument, "move_eyes: no eye pixels");
            for (auto& l : out.labels)
                if (l == eye_left || l == eye_right) l = face;
            for (long r = 0; r < h; ++r)
                for (long c = 0; c < w; ++c) {
                    const int l = y.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
                    if (l != eye_left && l != eye_right) continue;
                    const long r2 = r + e.dy, c2 = c + e.dx;
                    if (!in(r2, c2)) continue;
                    int& dst = out.at(static_cast<std::size_t>(r2), static_cast<std::size_t>(c2));
                    if (dst == face) dst = l;
                }
            break;
        }
        case EditKind::open_mouth:
        case EditKind::enlarge_part: {
            const int cls = e.kind == EditKind::open_mouth ? static_cast<int>(mouth) : e.target;
            detail::require_present(y, cls, to_string(e.kind).c_str());
            PIXGUIDE_CHECK(e.amount >= 0, invalid_argument, "growth amount must be non-negative");
            const int host = detail::host_class(cls);
            const bool vertical = e.kind == EditKind::open_mouth;
            for (long r = 0; r < h; ++r)
                for (long c = 0; c < w; ++c) {
                    if (y.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) != host) continue;
                    bool reach = false;
                    for (long dr = -e.amount; dr <= e.amount && !reach; ++dr)
                        for (long dc = vertical ? 0 : -e.amount; dc <= (vertical ? 0 : e.amount) && !reach; ++dc)
                            reach = in(r + dr, c + dc) &&
                                    y.at(static_cast<std::size_t>(r + dr), static_cast<std::size_t>(c + dc)) == cls;
                    if (reach) out.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = cls;
                }
            break;
        }
        case EditKind::close_mouth: {
            detail::require_present(y, mouth, "close_mouth");
            // Keep a single row of mouth: the one through the mouth's centroid.
            double sum = 0;
            for (long r = 0; r < h; ++r)
                for (long c = 0; c < w; ++c)
                    if (y.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) == mouth) sum += static_cast<double>(r);
            const long mid = std::lround(sum / static_cast<double>(y.count(mouth)));
            for (long r = 0; r < h; ++r)
                for (long c = 0; c < w; ++c)
                    if (r != mid && y.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) == mouth)
                        out.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = face;
            break;
        }
        case EditKind::remove_part: {
            detail::require_present(y, e.target, "remove_part");
            const int host = detail::host_class(e.target);
            for (auto& l : out.labels)
                if (l == e.target) l = host;
            break;
        }
    }
    out.validate();
    return out;
}

/// Benchmark list: edits drawn uniformly from the kinds, with parameters
/// drawn from fixed small sets.
inline std::vector<BenchmarkEdit> sample_benchmark_edits(std::size_t n, std::uint64_t seed) {
    SceneRng r(seed);
    auto pick = [&](std::size_t k) { return static_cast<std::size_t>(r.next() % k); };
    std::vector<BenchmarkEdit> out;
    for (std::size_t i = 0; i < n; ++i) {
        BenchmarkEdit e;
        e.kind = static_cast<EditKind>(pick(5));
        switch (e.kind) {
            case EditKind::move_eyes: {
                static const int offs[][2] = {{0, -2}, {0, 2}, {-2, 0}, {2, 0}, {0, -3}, {0, 3}};
                const auto k = pick(6);
                e.dx = offs[k][0];
                e.dy = offs[k][1];
                break;
            }
            case EditKind::open_mouth: e.amount = 1 + static_cast<int>(pick(2)); break;
            case EditKind::close_mouth: break;
            case EditKind::enlarge_part: {
                static const int parts[] = {eye_left, eye_right, mouth, hair};
                e.target = parts[pick(4)];
                e.amount = e.target == hair ? 2 : 1;
                break;
            }
            case EditKind::remove_part: {
                static const int parts[] = {mouth, hair};
                e.target = parts[pick(2)];
                break;
            }
        }
        out.push_back(e);
    }
    return out;
}

}  // namespace pixguide
