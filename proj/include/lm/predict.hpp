// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "lm/aggregate.hpp"
#include "lm/psv.hpp"
#include "lm/texture.hpp"

#include <span>
#include <vector>

namespace lm {

/// Stand-ins for the learned predictors. Each returns the same tensor
/// layout a trained network would, so the rest of the pipeline is unchanged.
enum class GeometrySource { Oracle, Photo, Constant };
enum class ColoringSource { Oracle, Passthrough };

GeometrySource parse_geometry_source(std::string_view s);
ColoringSource parse_coloring_source(std::string_view s);

struct PhotoConfig {
    double tau = 0.05; // softmax temperature on the matching cost
    int radius = 2;    // box filter radius
    int threads = 1;
};

/// Box-filtered mean absolute colour difference between each slab and the
/// reference, over valid samples only.
struct CostVolume {
    int planes = 0;
    int height = 0;
    int width = 0;
    std::vector<double> cost; // (y, x, plane)
    Mask any_valid;           // pixel has at least one plane with valid samples

    double at(int y, int x, int k) const noexcept {
        return cost[(static_cast<std::size_t>(y) * width + x) * planes + k];
    }
};

CostVolume photoconsistency_cost(const PlaneSweepVolume &psv, const PhotoConfig &cfg = {});

/// Index of the lowest-cost plane over all planes, per pixel (row-major).
std::vector<int> cost_argmin(const CostVolume &cost);

struct GeometryPrediction {
    BetaVolume beta;
    std::size_t all_invalid = 0; // pixels that fell back to uniform weights
};

GeometryPrediction predict_geometry_photoconsistency(const PlaneSweepVolume &psv, DepthScheme scheme, int layers,
                                                     const PhotoConfig &cfg = {});

/// Scene-independent guess: layers spread evenly through the plane range.
BetaVolume predict_geometry_constant(int height, int width, const PlaneStack &planes, DepthScheme scheme,
                                     int layers);

/// Volume whose aggregation reproduces `gt` (one grid per layer): exact for
/// BI, two adjacent planes for GC and SA (GC also clamps to each group's
/// range). Throws DepthOutOfRange.
BetaVolume predict_geometry_oracle(const DepthLayerSet &gt, const PlaneStack &planes, DepthScheme scheme,
                                   SoftAverage mode = SoftAverage::Linear);

/// RAW colours and alphas copied from ground-truth RGBA layer textures.
ColoringOutput predict_coloring_oracle(std::span<const Image> gt_textures);

/// RSBg with fixed weights (1/2, 1/2, 0) and the reference view as
/// background. Layer j < L-1 gets alpha exp(-|side_j - I_r| / tau); the last
/// layer is opaque.
ColoringOutput predict_coloring_passthrough(const Image &reference, const std::vector<WarpResult> &side_layers,
                                            double tau = 0.1);

} // namespace lm
