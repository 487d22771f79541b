// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdlib>
#include <fstream>
#include <string>
#include <thread>

#include "pixguide/error.hpp"

namespace pixguide {

/// Service settings. File format: one `key = value` per line, `#` starts a
/// comment. Keys: host, port, workspace, workers, thumbnails, model.
/// Environment overrides: PIXGUIDE_HOST, PIXGUIDE_PORT, PIXGUIDE_WORKSPACE,
/// PIXGUIDE_WORKERS.
struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string workspace = "workspace";
    unsigned workers = 0;     // 0: hardware concurrency
    int thumbnails = 5;       // thumbnail events per candidate
    std::string model = "default";

    unsigned worker_count() const { return workers ? workers : std::max(1u, std::thread::hardware_concurrency()); }

    void set(const std::string& key, const std::string& value) {
        auto as_int = [&](int lo, int hi) {
            std::size_t used = 0;
            int v = 0;
            try {
                v = std::stoi(value, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            PIXGUIDE_CHECK(used == value.size() && v >= lo && v <= hi, invalid_argument,
                           "config: bad value for " + key + ": '" + value + "'");
            return v;
        };
        if (key == "host") host = value;
        else if (key == "port") port = as_int(0, 65535);
        else if (key == "workspace") workspace = value;
        else if (key == "workers") workers = static_cast<unsigned>(as_int(0, 1024));
        else if (key == "thumbnails") thumbnails = as_int(0, 1000);
        else if (key == "model") model = value;
        else throw Error(ErrorCode::invalid_argument, "config: unknown key " + key);
    }

    void load_file(const std::string& path) {
        std::ifstream in(path);
        PIXGUIDE_CHECK(in.good(), io, "config: cannot open " + path);
        std::string line;
        for (int n = 1; std::getline(in, line); ++n) {
            if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
            auto trim = [](std::string s) {
                const auto a = s.find_first_not_of(" \t\r"), b = s.find_last_not_of(" \t\r");
                return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
            };
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            PIXGUIDE_CHECK(eq != std::string::npos, invalid_argument,
                           "config: line " + std::to_string(n) + " is not key = value");
            set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }

    void apply_env() {
        for (auto [env, key] : {std::pair{"PIXGUIDE_HOST", "host"}, std::pair{"PIXGUIDE_PORT", "port"},
                                std::pair{"PIXGUIDE_WORKSPACE", "workspace"}, std::pair{"PIXGUIDE_WORKERS", "workers"}})
            if (const char* v = std::getenv(env)) set(key, v);
    }
};

}  // namespace pixguide
