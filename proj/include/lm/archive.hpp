// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "lm/texture.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace lm {

/// Layered-mesh scene archive (.lms): a directory holding
///   manifest.json  version, sizes, intrinsics, depth range, buffer descriptors
///   depths.bin     float32 little-endian, L*h*w, layer-major then row-major
///   textures.bin   uint8 straight RGBA, L*H*W*4, layer-major
inline constexpr int kArchiveVersion = 1;

/// Manifest bytes exactly as written (2-space indent, sorted keys, trailing newline).
std::string manifest_json(const TexturedScene &scene);

/// Throws InvalidScene or IoError.
void export_scene(const TexturedScene &scene, const std::filesystem::path &dir);
/// Throws IoError or FormatError (missing keys, wrong lengths, hash mismatch).
TexturedScene import_scene(const std::filesystem::path &dir);

/// Lower-case hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view bytes);

/// SHA-256 of the manifest bytes.
std::string manifest_hash(const TexturedScene &scene);
std::string manifest_hash(const std::filesystem::path &dir);

} // namespace lm
