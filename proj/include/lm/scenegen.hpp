// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "lm/coalesce.hpp"
#include "lm/occlusion.hpp"
#include "lm/texture.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace lm {

enum class DepthPattern { Constant, Tilted, Wavy };
enum class TexturePattern { Checker, Gradient, Noise };
enum class AlphaPattern { Auto, Opaque, Cutout };

/// One ground-truth layer. Zero-valued parameters are drawn from the seed.
struct LayerSpec {
    DepthPattern depth = DepthPattern::Constant;
    TexturePattern texture = TexturePattern::Noise;
    AlphaPattern alpha = AlphaPattern::Auto; // Auto: last layer opaque, others cut out
    double base_depth = 0.0;                 // depth on the optical axis
    double tilt_x = 0.0;                     // Tilted: plane (tilt_x, tilt_y, 1) . X = base_depth
    double tilt_y = 0.0;
    double wave_amplitude = 0.0; // Wavy: relative depth modulation
};

struct SceneSpec {
    int layers = 3;
    int width = 128;
    int height = 128;
    double focal = 0.0;      // pixels; 0 means equal to the width
    double baseline = 0.05;  // side camera centre at (baseline, 0, 0)
    /// Novel camera centre in units of the baseline, and its yaw in degrees.
    Vec3 novel_center = Vec3(-1.0, 0.25, 0.0);
    double novel_yaw_deg = 0.0;
    double depth_near = 1.0;
    double depth_far = 100.0;
    /// Empty: layer kinds are drawn from the seed.
    std::vector<LayerSpec> layer_specs;

    /// Throws InvalidSpec.
    void validate() const;
};

/// Analytic description of one generated layer.
struct SyntheticLayer {
    LayerSpec spec; // with every parameter resolved
    double wave_kx = 0.0, wave_ky = 0.0, wave_px = 0.0, wave_py = 0.0;
    double min_depth = 0.0;
    double max_depth = 0.0;

    /// Depth of the surface under reference pixel `p` (defined everywhere).
    double depth_at(const Vec2 &p, const CameraIntrinsics &k) const;
    bool planar() const noexcept { return spec.depth != DepthPattern::Wavy; }
};

struct SyntheticScene {
    std::uint64_t seed = 0;
    SceneSpec spec;
    CameraRig rig;
    std::vector<SyntheticLayer> layers;
    DepthLayerSet depths; // per layer at every reference pixel
    TexturedScene scene;  // full-resolution ground-truth layered mesh
};

/// Deterministic in (seed, spec). Throws InvalidSpec.
SyntheticScene generate(std::uint64_t seed, const SceneSpec &spec);

/// Correspondences between the reference view and `target`, from analytic
/// ray/surface intersections with the front-most layer whose alpha > 0.5.
struct Correspondences {
    FlowField ref_to_target; // on reference pixels, stores target positions
    FlowField target_to_ref; // on target pixels, stores reference positions
    Mask covisible;          // target pixels whose reference footprint shows the same surface
    Mask disoccluded;        // target pixels whose surface is hidden in the reference view
    Mask out_of_view;        // target pixels with no surface or leaving the reference frame
};

Correspondences analytic_correspondences(const SyntheticScene &scene, const Camera &target);

struct GroundTruthViews {
    Image reference; // RGB renders
    Image side;
    Image novel;
    Image reference_depth; // front-most surface depth (0 where none)
    Correspondences novel_flow;
};

GroundTruthViews ground_truth_views(const SyntheticScene &scene, int threads = 1);

/// Ground-truth layers snapped to their nearest plane (in inverse depth) as an MPI.
MultiPlaneImage mpi_from_scene(const SyntheticScene &scene, const PlaneStack &planes);

/// Writes the scene bundle: PPM views, PFM depths and flows, cameras.txt,
/// PGM labels, gt.lms and scene.json. Optional MPI with `mpi_planes` > 0.
void write_bundle(const std::filesystem::path &dir, const SyntheticScene &scene, const GroundTruthViews &views,
                  int mpi_planes = 0);

struct Bundle {
    CameraRig rig;
    Image reference;
    Image side;
    Image novel;
    double depth_near = 1.0;
    double depth_far = 100.0;
    std::filesystem::path gt_scene; // gt.lms, may be missing
    std::filesystem::path dir;
};

/// Reads scene.json and the three views. Throws IoError or FormatError.
Bundle read_bundle(const std::filesystem::path &dir);

/// Reads an MPI written by write_bundle (mpi/ subdirectory).
MultiPlaneImage read_mpi(const std::filesystem::path &dir);
void write_mpi(const std::filesystem::path &dir, const MultiPlaneImage &mpi);

} // namespace lm
