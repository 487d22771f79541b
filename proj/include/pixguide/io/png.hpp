// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <png.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pixguide/data/segmap.hpp"
#include "pixguide/tensor/tensor.hpp"

namespace pixguide {

struct RawImage {
    std::size_t width = 0, height = 0, channels = 0;  // channels: 1 (gray) or 3 (rgb)
    std::vector<std::uint8_t> pixels;                 // interleaved, row-major
};

inline std::vector<std::uint8_t> encode_png(const RawImage& img) {
    PIXGUIDE_CHECK(img.channels == 1 || img.channels == 3, invalid_argument, "png: 1 or 3 channels");
    PIXGUIDE_CHECK(img.pixels.size() == img.width * img.height * img.channels, shape_mismatch, "png: buffer size");
    png_image im{};
    im.version = PNG_IMAGE_VERSION;
    im.width = static_cast<png_uint_32>(img.width);
    im.height = static_cast<png_uint_32>(img.height);
    im.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&im, nullptr, &size, 0, img.pixels.data(), 0, nullptr))
        throw Error(ErrorCode::io, std::string("png encode: ") + im.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&im, out.data(), &size, 0, img.pixels.data(), 0, nullptr))
        throw Error(ErrorCode::io, std::string("png encode: ") + im.message);
    out.resize(size);
    return out;
}

/// Decodes to `channels` (1 or 3) regardless of the stored format.
inline RawImage decode_png(const std::vector<std::uint8_t>& bytes, std::size_t channels) {
    png_image im{};
    im.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&im, bytes.data(), bytes.size()))
        throw Error(ErrorCode::io, std::string("png decode: ") + im.message);
    im.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    RawImage out{im.width, im.height, channels, std::vector<std::uint8_t>(PNG_IMAGE_SIZE(im))};
    if (!png_image_finish_read(&im, nullptr, out.pixels.data(), 0, nullptr)) {
        png_image_free(&im);
        throw Error(ErrorCode::io, std::string("png decode: ") + im.message);
    }
    return out;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw Error(ErrorCode::io, "cannot read " + p.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error(ErrorCode::io, "cannot write " + p.string());
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline std::uint8_t to_u8(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp((v + 1.0) * 127.5, 0.0, 255.0)));
}

inline double from_u8(std::uint8_t u) { return static_cast<double>(u) / 127.5 - 1.0; }

/// [3,H,W] or [1,3,H,W] model-space tensor to an RGB PNG.
template <class T>
std::vector<std::uint8_t> image_to_png(const Tensor<T>& x) {
    const auto& s = x.shape();
    PIXGUIDE_CHECK((s.size() == 3 && s[0] == 3) || (s.size() == 4 && s[0] == 1 && s[1] == 3), shape_mismatch,
                   "png: expected a single RGB image, got " + to_string(s));
    const std::size_t h = s[s.size() - 2], w = s.back();
    RawImage img{w, h, 3, std::vector<std::uint8_t>(3 * h * w)};
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < h * w; ++i) img.pixels[i * 3 + c] = to_u8(static_cast<double>(x[c * h * w + i]));
    return encode_png(img);
}

template <class T = double>
Tensor<T> image_from_png(const std::vector<std::uint8_t>& bytes) {
    const auto img = decode_png(bytes, 3);
    const std::size_t hw = img.width * img.height;
    std::vector<T> v(3 * hw);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < hw; ++i) v[c * hw + i] = static_cast<T>(from_u8(img.pixels[i * 3 + c]));
    return Tensor<T>(Shape{3, img.height, img.width}, std::move(v));
}

/// Single-channel PNG whose gray value is the class id.
inline std::vector<std::uint8_t> labels_to_png(const SegMap& y) {
    PIXGUIDE_CHECK(y.num_classes() <= 256, invalid_argument, "png: at most 256 classes");
    RawImage img{y.width, y.height, 1, std::vector<std::uint8_t>(y.size())};
    for (std::size_t i = 0; i < y.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>(y.labels[i]);
    return encode_png(img);
}

inline SegMap labels_from_png(const std::vector<std::uint8_t>& bytes, Palette palette) {
    const auto img = decode_png(bytes, 1);
    std::vector<int> labels(img.pixels.begin(), img.pixels.end());
    return SegMap(img.height, img.width, std::move(labels), std::move(palette));
}

/// Palette-colored RGB rendering of a map, for viewing.
inline std::vector<std::uint8_t> labels_to_color_png(const SegMap& y) {
    RawImage img{y.width, y.height, 3, std::vector<std::uint8_t>(3 * y.size())};
    for (std::size_t i = 0; i < y.size(); ++i)
        for (std::size_t c = 0; c < 3; ++c) img.pixels[i * 3 + c] = y.palette[static_cast<std::size_t>(y.labels[i])].color[c];
    return encode_png(img);
}

}  // namespace pixguide
