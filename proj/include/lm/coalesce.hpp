// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "lm/aggregate.hpp"
#include "lm/core.hpp"
#include "lm/psv.hpp"
#include "lm/texture.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace lm {

/// Fronto-parallel RGBA planes (straight alpha) in the reference frustum.
struct MultiPlaneImage {
    CameraIntrinsics reference;
    PlaneStack planes;
    std::vector<Image> rgba; // one H x W x 4 image per plane, nearest first

    int height() const noexcept { return reference.height; }
    int width() const noexcept { return reference.width; }
    /// Throws InvalidScene.
    void validate() const;
};

struct CoalesceConfig {
    int layers = 4;
    double sigma = 1.0;    // jitter std in pixels
    int samples = 64;      // rays per texel
    std::uint64_t seed = 0;
    double eps_alpha = 1e-6; // floor for the per-ray transmittance
    /// Cast rays from the camera centre through q instead of from q through the texel.
    bool through_camera_center = false;
    int threads = 1;

    /// Throws InvalidConfig.
    void validate() const;
};

/// Compose-over of plane depths inside each group; the farthest plane of a group is opaque.
DepthLayerSet merge_depths(const MultiPlaneImage &mpi, int layers);

struct MergedTexel {
    std::array<double, 3> color{}; // premultiplied
    double transmittance = 1.0;
    bool degenerate = false;
};

/// Log-transmittance weighted combination of per-ray statistics.
/// `colors` holds 3 premultiplied values per ray. Transmittances are clamped
/// to [eps_alpha, 1] before taking logarithms.
MergedTexel merge_ray_statistics(std::span<const double> transmittance, std::span<const double> colors,
                                 std::span<const double> weights, double eps_alpha);

struct CoalesceResult {
    TexturedScene scene;
    std::size_t degenerate_texels = 0;
};

/// Monte-Carlo texture of every merged layer; `layers` comes from merge_depths.
CoalesceResult merge_textures(const MultiPlaneImage &mpi, const DepthLayerSet &layers, const CoalesceConfig &cfg);

/// merge_depths followed by merge_textures.
CoalesceResult coalesce(const MultiPlaneImage &mpi, const CoalesceConfig &cfg);

/// One constant-depth mesh layer per plane, for rendering an MPI directly.
TexturedScene mpi_to_scene(const MultiPlaneImage &mpi);

} // namespace lm
