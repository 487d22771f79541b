// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pixguide/data/scene.hpp"
#include "pixguide/io/hash.hpp"
#include "pixguide/io/png.hpp"

// On-disk layout:
//   <root>/manifest.json           spec, per-split seeds and checksums
//   <root>/palette.json
//   <root>/<split>/images/NNNN.png RGB
//   <root>/<split>/labels/NNNN.png gray = class id

namespace pixguide {

struct Split {
    std::string name;
    std::uint64_t base_seed = 0;
    std::vector<std::uint64_t> seeds;
    std::vector<Tensor<double>> images;
    std::vector<SegMap> labels;

    std::size_t size() const { return images.size(); }
};

inline Split generate_split(const SceneSpec& spec, const std::string& name, std::size_t n, std::uint64_t base_seed) {
    Split s{name, base_seed, {}, {}, {}};
    for (std::size_t i = 0; i < n; ++i) {
        const auto seed = scene_seed(base_seed, i);
        auto scene = generate_scene(spec, seed);
        s.seeds.push_back(seed);
        s.images.push_back(std::move(scene.image));
        s.labels.push_back(std::move(scene.labels));
    }
    return s;
}

struct DatasetSizes {
    std::size_t train = 500, annotated = 20, test = 50;
};

/// The three standard splits. Split seeds are offsets of one dataset seed.
inline std::vector<Split> generate_dataset(const SceneSpec& spec, DatasetSizes sizes, std::uint64_t seed) {
    return {generate_split(spec, "train", sizes.train, seed), generate_split(spec, "annotated", sizes.annotated, seed + 1),
            generate_split(spec, "test", sizes.test, seed + 2)};
}

inline std::string indexed_name(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04zu.png", i);
    return buf;
}

inline void save_dataset(const std::filesystem::path& root, const SceneSpec& spec, const std::vector<Split>& splits) {
    nlohmann::json manifest{{"spec", spec.to_json()}, {"splits", nlohmann::json::object()}};
    const Palette palette = splits.empty() || splits[0].labels.empty() ? default_palette() : splits[0].labels[0].palette;
    for (const auto& s : splits) {
        nlohmann::json files = nlohmann::json::array();
        for (std::size_t i = 0; i < s.size(); ++i) {
            const auto img = image_to_png(s.images[i]);
            const auto lab = labels_to_png(s.labels[i]);
            const auto name = indexed_name(i);
            write_file(root / s.name / "images" / name, img);
            write_file(root / s.name / "labels" / name, lab);
            files.push_back({{"image", s.name + "/images/" + name},
                             {"label", s.name + "/labels/" + name},
                             {"seed", s.seeds[i]},
                             {"image_sha256", sha256_hex(img)},
                             {"label_sha256", sha256_hex(lab)}});
        }
        manifest["splits"][s.name] = {{"base_seed", s.base_seed}, {"count", s.size()}, {"files", files}};
    }
    const auto pal = palette_to_json(palette).dump(2);
    write_file(root / "palette.json", std::vector<std::uint8_t>(pal.begin(), pal.end()));
    const auto text = manifest.dump(2);
    write_file(root / "manifest.json", std::vector<std::uint8_t>(text.begin(), text.end()));
}

inline nlohmann::json load_manifest(const std::filesystem::path& root) {
    const auto bytes = read_file(root / "manifest.json");
    return nlohmann::json::parse(bytes.begin(), bytes.end());
}

/// Loads one split, verifying checksums.
inline Split load_split(const std::filesystem::path& root, const std::string& name) {
    const auto manifest = load_manifest(root);
    PIXGUIDE_CHECK(manifest.at("splits").contains(name), missing_artifact, "dataset: no split " + name);
    const auto pal_bytes = read_file(root / "palette.json");
    const Palette palette = palette_from_json(nlohmann::json::parse(pal_bytes.begin(), pal_bytes.end()));
    const auto& js = manifest["splits"][name];
    Split s{name, js.at("base_seed").get<std::uint64_t>(), {}, {}, {}};
    for (const auto& f : js.at("files")) {
        const auto img = read_file(root / f.at("image").get<std::string>());
        const auto lab = read_file(root / f.at("label").get<std::string>());
        PIXGUIDE_CHECK(sha256_hex(img) == f.at("image_sha256") && sha256_hex(lab) == f.at("label_sha256"), io,
                       "dataset: checksum mismatch for " + f.at("image").get<std::string>());
        s.seeds.push_back(f.at("seed"));
        s.images.push_back(image_from_png(img));
        s.labels.push_back(labels_from_png(lab, palette));
    }
    return s;
}

}  // namespace pixguide
