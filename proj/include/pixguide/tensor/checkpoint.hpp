// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "pixguide/tensor/tensor.hpp"

// On-disk layout:
//   8 bytes   magic "PXGCKPT\0"
//   4 bytes   format version (u32 LE)
//   8 bytes   manifest length L (u64 LE)
//   L bytes   manifest JSON: {"version", "meta", "tensors": [{name, shape, dtype, offset, nbytes}]}
//   ...       raw little-endian blobs; offsets are relative to the end of the manifest

namespace pixguide {

static_assert(std::endian::native == std::endian::little, "checkpoint blobs are written in host order");

enum class DType { f32, f64 };

inline const char* dtype_name(DType d) { return d == DType::f32 ? "f32" : "f64"; }

inline DType parse_dtype(const std::string& s) {
    if (s == "f32") return DType::f32;
    if (s == "f64") return DType::f64;
    throw Error(ErrorCode::io, "checkpoint: unknown dtype " + s);
}

template <class T>
constexpr DType dtype_of() {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    return std::is_same_v<T, float> ? DType::f32 : DType::f64;
}

class Checkpoint {
public:
    static constexpr std::uint32_t kVersion = 1;

    struct Entry {
        Shape shape;
        DType dtype;
        std::vector<unsigned char> bytes;
    };

    nlohmann::json& meta() { return meta_; }
    const nlohmann::json& meta() const { return meta_; }

    template <class T>
    void put(const std::string& name, const Tensor<T>& t) {
        Entry e{t.shape(), dtype_of<T>(), std::vector<unsigned char>(t.size() * sizeof(T))};
        std::memcpy(e.bytes.data(), t.data(), e.bytes.size());
        entries_[name] = std::move(e);
    }

    bool contains(const std::string& name) const { return entries_.count(name) > 0; }

    /// Loads an entry converting to T when the stored dtype differs.
    template <class T>
    Tensor<T> get(const std::string& name, bool requires_grad = false) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw Error(ErrorCode::missing_artifact, "checkpoint: missing tensor " + name);
        const Entry& e = it->second;
        const std::size_t n = numel(e.shape);
        std::vector<T> out(n);
        if (e.dtype == DType::f32) {
            std::vector<float> raw(n);
            std::memcpy(raw.data(), e.bytes.data(), n * sizeof(float));
            std::copy(raw.begin(), raw.end(), out.begin());
        } else {
            std::vector<double> raw(n);
            std::memcpy(raw.data(), e.bytes.data(), n * sizeof(double));
            std::copy(raw.begin(), raw.end(), out.begin());
        }
        return Tensor<T>(e.shape, std::move(out), requires_grad);
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& [k, _] : entries_) out.push_back(k);
        return out;
    }

    void save(const std::filesystem::path& path) const {
        nlohmann::json manifest;
        manifest["version"] = kVersion;
        manifest["meta"] = meta_;
        manifest["tensors"] = nlohmann::json::array();
        std::uint64_t offset = 0;
        for (const auto& [name, e] : entries_) {
            manifest["tensors"].push_back({{"name", name},
                                           {"shape", e.shape},
                                           {"dtype", dtype_name(e.dtype)},
                                           {"offset", offset},
                                           {"nbytes", e.bytes.size()}});
            offset += e.bytes.size();
        }
        const std::string text = manifest.dump();
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        const auto tmp = path.string() + ".tmp";
        {
            std::ofstream os(tmp, std::ios::binary);
            if (!os) throw Error(ErrorCode::io, "checkpoint: cannot write " + tmp);
            os.write("PXGCKPT\0", 8);
            const std::uint32_t version = kVersion;
            os.write(reinterpret_cast<const char*>(&version), sizeof(version));
            const std::uint64_t len = text.size();
            os.write(reinterpret_cast<const char*>(&len), sizeof(len));
            os.write(text.data(), static_cast<std::streamsize>(text.size()));
            for (const auto& [_, e] : entries_)
                os.write(reinterpret_cast<const char*>(e.bytes.data()), static_cast<std::streamsize>(e.bytes.size()));
            if (!os) throw Error(ErrorCode::io, "checkpoint: short write to " + tmp);
        }
        std::filesystem::rename(tmp, path);
    }

    static Checkpoint load(const std::filesystem::path& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw Error(ErrorCode::missing_artifact, "checkpoint: cannot open " + path.string());
        char magic[8];
        is.read(magic, 8);
        if (!is || std::memcmp(magic, "PXGCKPT\0", 8) != 0)
            throw Error(ErrorCode::io, "checkpoint: bad magic in " + path.string());
        std::uint32_t version = 0;
        std::uint64_t len = 0;
        is.read(reinterpret_cast<char*>(&version), sizeof(version));
        is.read(reinterpret_cast<char*>(&len), sizeof(len));
        if (!is || version != kVersion) throw Error(ErrorCode::io, "checkpoint: unsupported version");
        std::string text(len, '\0');
        is.read(text.data(), static_cast<std::streamsize>(len));
        if (!is) throw Error(ErrorCode::io, "checkpoint: truncated manifest");
        const auto manifest = nlohmann::json::parse(text);
        const auto blob_start = is.tellg();
        Checkpoint ck;
        ck.meta_ = manifest.value("meta", nlohmann::json::object());
        for (const auto& t : manifest.at("tensors")) {
            Entry e;
            e.shape = t.at("shape").get<Shape>();
            e.dtype = parse_dtype(t.at("dtype").get<std::string>());
            const auto nbytes = t.at("nbytes").get<std::uint64_t>();
            const std::size_t width = e.dtype == DType::f32 ? 4 : 8;
            if (nbytes != numel(e.shape) * width) throw Error(ErrorCode::io, "checkpoint: size mismatch");
            e.bytes.resize(nbytes);
            is.seekg(blob_start + static_cast<std::streamoff>(t.at("offset").get<std::uint64_t>()));
            is.read(reinterpret_cast<char*>(e.bytes.data()), static_cast<std::streamsize>(nbytes));
            if (!is) throw Error(ErrorCode::io, "checkpoint: truncated blob " + t.at("name").get<std::string>());
            ck.entries_[t.at("name").get<std::string>()] = std::move(e);
        }
        return ck;
    }

private:
    nlohmann::json meta_ = nlohmann::json::object();
    std::map<std::string, Entry> entries_;
};

}  // namespace pixguide
