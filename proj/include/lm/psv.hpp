// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "lm/core.hpp"

#include <span>
#include <vector>

namespace lm {

/// Fronto-parallel plane depths in the reference frame, nearest first.
class PlaneStack {
public:
    PlaneStack() = default;
    /// Throws InvalidRange unless depths are positive and strictly increasing.
    explicit PlaneStack(std::vector<double> depths);

    std::size_t size() const noexcept { return depths_.size(); }
    double operator[](std::size_t k) const noexcept { return depths_[k]; }
    double nearest() const noexcept { return depths_.front(); }
    double farthest() const noexcept { return depths_.back(); }
    std::span<const double> depths() const noexcept { return depths_; }

private:
    std::vector<double> depths_;
};

/// P planes spaced uniformly in inverse depth, both endpoints included.
PlaneStack place_planes(double d_near, double d_far, int count);

struct WarpResult {
    Image image;
    Mask valid;
};

/// Maps reference pixels to side pixels for the plane z = depth:
/// K_s (R + t n^T / depth) K_r^-1 with n = (0, 0, 1).
Mat3 plane_homography(const CameraIntrinsics &reference, const Camera &side, double depth);

/// Per reference pixel: backproject at `depth`, move into the side camera,
/// project and bilinearly sample. Pixels landing outside the side frame (or
/// behind it) are zero and flagged invalid.
WarpResult warp_side_to_plane(const Image &side_image, const CameraRig &rig, double depth, int out_height,
                              int out_width);

struct PlaneSweepVolume {
    PlaneStack planes;
    std::vector<Image> slabs;
    std::vector<Mask> valid;
    Image reference;

    int height() const noexcept { return reference.height(); }
    int width() const noexcept { return reference.width(); }
};

PlaneSweepVolume build_psv(const Image &reference, const Image &side, const CameraRig &rig,
                           const PlaneStack &planes, int threads = 1);

} // namespace lm
