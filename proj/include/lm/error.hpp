// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lm {

enum class ErrorCode {
    NonPositiveDepth,
    InvalidIntrinsics,
    InvalidPose,
    InvalidRange,
    TooFewPlanes,
    IndivisibleGroups,
    BetaOutOfRange,
    SchemeShapeMismatch,
    RowOutOfRange,
    AlphaOutOfRange,
    DegenerateCamera,
    ShapeMismatch,
    ConventionMismatch,
    SingleLayer,
    DegenerateGrid,
    ImageTooSmall,
    CropTooLarge,
    DepthOutOfRange,
    InvalidSpec,
    InvalidScene,
    InvalidConfig,
    IoError,
    FormatError,
};

std::string_view to_string(ErrorCode code);

/// Domain error carrying a machine-readable code. Conditions that are
/// reported rather than raised (coverage flips, degenerate texels, pixels
/// without valid samples) live in the result structs instead.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace lm
