// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#include "lm/psv.hpp"

#include "lm/parallel.hpp"

#include <cmath>
#include <string>

namespace lm {

PlaneStack::PlaneStack(std::vector<double> depths) : depths_(std::move(depths)) {
    if (depths_.empty()) {
        throw Error(ErrorCode::TooFewPlanes, "plane stack is empty");
    }
    for (std::size_t k = 0; k < depths_.size(); ++k) {
        if (!(depths_[k] > 0.0) || !std::isfinite(depths_[k]) || (k > 0 && !(depths_[k] > depths_[k - 1]))) {
            throw Error(ErrorCode::InvalidRange, "plane depths must be positive and strictly increasing");
        }
    }
}

PlaneStack place_planes(double d_near, double d_far, int count) {
    if (!(d_near > 0.0) || !(d_near < d_far) || !std::isfinite(d_far)) {
        throw Error(ErrorCode::InvalidRange,
                    "need 0 < d_near < d_far, got " + std::to_string(d_near) + ".." + std::to_string(d_far));
    }
    if (count < 2) {
        throw Error(ErrorCode::TooFewPlanes, "need at least 2 planes, got " + std::to_string(count));
    }
    const double inv_near = 1.0 / d_near;
    const double inv_far = 1.0 / d_far;
    std::vector<double> depths(static_cast<std::size_t>(count));
    depths.front() = d_near;
    depths.back() = d_far;
    for (int k = 1; k + 1 < count; ++k) {
        const double t = static_cast<double>(k) / (count - 1);
        depths[static_cast<std::size_t>(k)] = 1.0 / ((1.0 - t) * inv_near + t * inv_far);
    }
    return PlaneStack(std::move(depths));
}

Mat3 plane_homography(const CameraIntrinsics &reference, const Camera &side, double depth) {
    if (!(depth > 0.0)) {
        throw Error(ErrorCode::NonPositiveDepth, "plane depth must be positive");
    }
    const Vec3 n(0.0, 0.0, 1.0);
    const Mat3 m = side.pose.rotation() + side.pose.translation() * n.transpose() / depth;
    return side.intrinsics.matrix() * m * reference.inverse_matrix();
}

WarpResult warp_side_to_plane(const Image &side_image, const CameraRig &rig, double depth, int out_height,
                              int out_width) {
    if (!(depth > 0.0)) {
        throw Error(ErrorCode::NonPositiveDepth, "plane depth must be positive");
    }
    WarpResult out{Image(out_height, out_width, side_image.channels()), Mask(out_height, out_width, false)};
    const auto &kr = rig.reference;
    const auto &side = rig.side;
    for (int y = 0; y < out_height; ++y) {
        for (int x = 0; x < out_width; ++x) {
            const Vec3 p_side = side.pose.apply(pixel_ray(Vec2(x, y), kr) * depth);
            if (!(p_side.z() > 0.0)) {
                continue;
            }
            const Vec2 at = project(p_side, side.intrinsics);
            out.valid.set(y, x, bilinear_sample(side_image, at, out.image.pixel(y, x)));
        }
    }
    return out;
}

PlaneSweepVolume build_psv(const Image &reference, const Image &side, const CameraRig &rig,
                           const PlaneStack &planes, int threads) {
    if (reference.channels() != 3 || side.channels() != 3) {
        throw Error(ErrorCode::ShapeMismatch, "plane sweep volume expects RGB inputs");
    }
    PlaneSweepVolume psv;
    psv.planes = planes;
    psv.reference = reference;
    psv.slabs.resize(planes.size());
    psv.valid.resize(planes.size());
    parallel_for(planes.size(), threads, [&](std::size_t k) {
        auto warped = warp_side_to_plane(side, rig, planes[k], reference.height(), reference.width());
        psv.slabs[k] = std::move(warped.image);
        psv.valid[k] = std::move(warped.valid);
    });
    return psv;
}

} // namespace lm
