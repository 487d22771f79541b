// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <shared_mutex>
#include <thread>
#include <string>

#include "pixguide/io/hash.hpp"
#include "pixguide/io/png.hpp"

// Content-addressed artifact store:
//   images/<sha256>.png      results/<sha256>.json
//   requests/<sha256>        result hash of a request body
//   models/<name>.ddpm       models/<name>.bank
//   datasets/<name>/

namespace pixguide {

inline bool is_hash(const std::string& h) {
    if (h.size() != 64) return false;
    for (char c : h)
        if (!std::isxdigit(static_cast<unsigned char>(c)) || std::isupper(static_cast<unsigned char>(c))) return false;
    return true;
}

inline void check_name(const std::string& n) {
    PIXGUIDE_CHECK(!n.empty() && n.size() <= 64, invalid_argument, "artifact name must have 1-64 characters");
    for (char c : n)
        PIXGUIDE_CHECK(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.', invalid_argument,
                       "artifact name may only hold letters, digits, '_', '-', '.'");
    PIXGUIDE_CHECK(n != "." && n != "..", invalid_argument, "artifact name may not be . or ..");
}

/// Hash of a JSON document in its canonical (sorted-key, compact) form.
inline std::string json_hash(const nlohmann::json& j) { return sha256_hex(j.dump()); }

class Workspace {
public:
    explicit Workspace(std::filesystem::path root) : root_(std::move(root)) {
        for (const char* d : {"images", "results", "requests", "models", "datasets"})
            std::filesystem::create_directories(root_ / d);
    }

    const std::filesystem::path& root() const { return root_; }

    std::string put_image(const std::vector<std::uint8_t>& png) { return put("images", png, ".png"); }

    template <class T>
    std::string put_image(const Tensor<T>& x) {
        return put_image(image_to_png(x));
    }

    std::optional<std::vector<std::uint8_t>> get_image(const std::string& hash) const { return get("images", hash, ".png"); }

    std::string put_result(const nlohmann::json& j) {
        const auto text = j.dump();
        return put("results", std::vector<std::uint8_t>(text.begin(), text.end()), ".json");
    }

    std::optional<nlohmann::json> get_result(const std::string& hash) const {
        auto b = get("results", hash, ".json");
        if (!b) return std::nullopt;
        return nlohmann::json::parse(b->begin(), b->end());
    }

    /// Result hash previously stored for a request hash.
    std::optional<std::string> cached(const std::string& request_hash) const {
        auto b = get("requests", request_hash, "");
        if (!b) return std::nullopt;
        return std::string(b->begin(), b->end());
    }

    void remember(const std::string& request_hash, const std::string& result_hash) {
        PIXGUIDE_CHECK(is_hash(request_hash) && is_hash(result_hash), invalid_argument, "workspace: bad hash");
        std::unique_lock lock(mu_);
        write_atomic(root_ / "requests" / request_hash, std::vector<std::uint8_t>(result_hash.begin(), result_hash.end()));
    }

    std::filesystem::path model_path(const std::string& name) const {
        check_name(name);
        return root_ / "models" / (name + ".ddpm");
    }
    std::filesystem::path bank_path(const std::string& name) const {
        check_name(name);
        return root_ / "models" / (name + ".bank");
    }
    std::filesystem::path dataset_path(const std::string& name) const {
        check_name(name);
        return root_ / "datasets" / name;
    }

private:
    static void write_atomic(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
        auto tmp = p;
        tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
        write_file(tmp, bytes);
        std::filesystem::rename(tmp, p);
    }

    std::string put(const char* dir, const std::vector<std::uint8_t>& bytes, const char* ext) {
        const auto h = sha256_hex(bytes);
        const auto p = root_ / dir / (h + ext);
        std::unique_lock lock(mu_);
        if (!std::filesystem::exists(p)) write_atomic(p, bytes);
        return h;
    }

    std::optional<std::vector<std::uint8_t>> get(const char* dir, const std::string& hash, const char* ext) const {
        if (!is_hash(hash)) return std::nullopt;
        const auto p = root_ / dir / (hash + ext);
        std::shared_lock lock(mu_);
        if (!std::filesystem::exists(p)) return std::nullopt;
        return read_file(p);
    }

    std::filesystem::path root_;
    mutable std::shared_mutex mu_;
};

}  // namespace pixguide
