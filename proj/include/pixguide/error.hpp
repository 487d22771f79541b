// Copyright (C) 2026 The pixguide Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pixguide {

enum class ErrorCode {
    invalid_argument,
    shape_mismatch,
    out_of_range,
    non_finite,
    not_in_graph,
    empty_roi,
    empty_dataset,
    missing_artifact,
    io,
    divergence,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::shape_mismatch: return "shape_mismatch";
        case ErrorCode::out_of_range: return "out_of_range";
        case ErrorCode::non_finite: return "non_finite";
        case ErrorCode::not_in_graph: return "not_in_graph";
        case ErrorCode::empty_roi: return "empty_roi";
        case ErrorCode::empty_dataset: return "empty_dataset";
        case ErrorCode::missing_artifact: return "missing_artifact";
        case ErrorCode::io: return "io";
        case ErrorCode::divergence: return "divergence";
    }
    return "unknown";
}

/// Every failure raised by the library carries a machine-readable code so the
/// service layer can map it onto an HTTP status without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

#define PIXGUIDE_CHECK(cond, code, msg)                                        \
    do {                                                                       \
        if (!(cond)) throw ::pixguide::Error(::pixguide::ErrorCode::code, msg); \
    } while (0)

}  // namespace pixguide
