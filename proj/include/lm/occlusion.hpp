// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "lm/core.hpp"
#include "lm/psv.hpp"

#include <filesystem>

namespace lm {

enum class FlowDirection { Backward, Forward };

/// Dense correspondences in absolute coordinates. For a backward flow F
/// between images A and B, B[q] = A[F[q]]: F lives on B's pixels and stores
/// positions in A.
struct FlowField {
    int height = 0;
    int width = 0;
    FlowDirection direction = FlowDirection::Backward;
    Image coords; // H x W x 2, (x, y)
    Mask valid;

    FlowField() = default;
    FlowField(int h, int w, FlowDirection dir = FlowDirection::Backward)
        : height(h), width(w), direction(dir), coords(h, w, 2), valid(h, w, true) {}

    Vec2 at(int y, int x) const { return {coords.at(y, x, 0), coords.at(y, x, 1)}; }
    void set(int y, int x, const Vec2 &p) {
        coords.at(y, x, 0) = p.x();
        coords.at(y, x, 1) = p.y();
    }
};

/// G[p] = p.
FlowField coordinate_grid(int height, int width);

/// out[q] = src[flow[q]], bilinear. Invalid where the flow is invalid or leaves src.
WarpResult backward_warp(const Image &src, const FlowField &flow);
/// Flow-valued variant; a sample is also invalid when any texel it touches is invalid in `src`.
FlowField backward_warp(const FlowField &src, const FlowField &flow);

/// Absolute <-> offset (F[q] - q) conversion. Offsets are H x W x 2.
Image to_offsets(const FlowField &flow);
FlowField from_offsets(const Image &offsets, FlowDirection dir = FlowDirection::Backward);

struct CycleResidual {
    Image residual; // H x W x 1 on the pixels of `f_nr`
    Mask valid;
};

/// |G_hat[q] - q| with G_hat = backward_warp(f_rn, f_nr). `f_rn` lives on
/// reference pixels (stores novel positions), `f_nr` on novel pixels (stores
/// reference positions). Throws ConventionMismatch unless both are backward flows.
CycleResidual cycle_residual(const FlowField &f_rn, const FlowField &f_nr);

struct OcclusionMask {
    Mask mask; // novel pixels; 1 = occluded; only set inside the crop
    double epsilon = 1.0;
    int crop = 16;
    std::size_t occluded = 0;
    std::size_t crop_pixels = 0;

    double fraction() const noexcept {
        return crop_pixels ? static_cast<double>(occluded) / static_cast<double>(crop_pixels) : 0.0;
    }
};

/// A pixel is occluded when its cycle residual is >= epsilon or the cycle
/// cannot be evaluated. Throws CropTooLarge.
OcclusionMask occlusion_mask(const FlowField &f_rn, const FlowField &f_nr, double epsilon = 1.0, int crop = 16);

/// Three-channel PFM: x, y, validity (1 or 0).
void write_flow_pfm(const std::filesystem::path &path, const FlowField &flow);
FlowField read_flow_pfm(const std::filesystem::path &path, FlowDirection dir = FlowDirection::Backward);

} // namespace lm
