// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "lm/core.hpp"

#include <cstdint>
#include <filesystem>

namespace lm::io {

/// Maps [0,1] to 0..255 with clamping and round-half-to-even.
std::uint8_t quantize_unit(double v) noexcept;

/// Binary P6, 8-bit RGB. Writing requires a 3-channel image.
void write_ppm(const std::filesystem::path &path, const Image &rgb);
Image read_ppm(const std::filesystem::path &path);

/// Binary P5, 8-bit gray, written from a mask (255 = set).
void write_pgm(const std::filesystem::path &path, const Mask &mask);
void write_pgm(const std::filesystem::path &path, const Image &gray);
Image read_pgm(const std::filesystem::path &path);

/// Little-endian float32 PFM with scale -1.0, rows stored bottom-to-top.
/// One channel uses the "Pf" header, three channels "PF".
void write_pfm(const std::filesystem::path &path, const Image &img);
Image read_pfm(const std::filesystem::path &path);

} // namespace lm::io
