// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "lm/error.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lm {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole intrinsics in pixels. Pixel (x, y) samples the continuous
/// coordinate (x, y) exactly; there is no half-pixel offset.
struct CameraIntrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 1;
    int height = 1;

    bool is_valid() const noexcept;
    /// Throws InvalidIntrinsics unless fx, fy > 0 and the principal point lies on the sensor.
    void validate() const;

    Mat3 matrix() const;
    Mat3 inverse_matrix() const;
};

/// Rigid transform mapping reference-camera coordinates to target-camera
/// coordinates: x_target = R * x_reference + t.
class RigidPose {
public:
    RigidPose() = default;
    /// Throws InvalidPose when R is not a rotation to 1e-9.
    RigidPose(const Mat3 &rotation, const Vec3 &translation);

    static RigidPose identity() { return {}; }
    static RigidPose translation_only(const Vec3 &t) { return RigidPose(Mat3::Identity(), t); }

    const Mat3 &rotation() const noexcept { return rotation_; }
    const Vec3 &translation() const noexcept { return translation_; }

    Vec3 apply(const Vec3 &p) const { return rotation_ * p + translation_; }
    /// (this ∘ first): apply `first`, then this pose.
    RigidPose compose(const RigidPose &first) const;
    RigidPose inverse() const;
    /// Camera centre expressed in the source (reference) frame.
    Vec3 center() const { return -rotation_.transpose() * translation_; }

    static bool is_rotation(const Mat3 &r, double tol = 1e-9);

private:
    Mat3 rotation_ = Mat3::Identity();
    Vec3 translation_ = Vec3::Zero();
};

struct Camera {
    CameraIntrinsics intrinsics;
    RigidPose pose;
};

/// The reference camera is the world frame; side and novel poses are relative to it.
struct CameraRig {
    CameraIntrinsics reference;
    Camera side;
    Camera novel;

    Camera reference_camera() const { return {reference, RigidPose::identity()}; }
};

Vec2 project(const Vec3 &point, const CameraIntrinsics &k);
Vec3 backproject(const Vec2 &pixel, double depth, const CameraIntrinsics &k);
/// Direction of the ray through `pixel` scaled so that its z component is 1.
inline Vec3 pixel_ray(const Vec2 &pixel, const CameraIntrinsics &k) {
    return {(pixel.x() - k.cx) / k.fx, (pixel.y() - k.cy) / k.fy, 1.0};
}

/// Dense row-major H x W x C buffer of doubles.
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, double fill = 0.0);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int channels() const noexcept { return channels_; }
    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
    }
    bool empty() const noexcept { return data_.empty(); }

    std::size_t index(int y, int x, int c = 0) const noexcept {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }
    double &at(int y, int x, int c = 0) noexcept { return data_[index(y, x, c)]; }
    double at(int y, int x, int c = 0) const noexcept { return data_[index(y, x, c)]; }
    std::span<double> pixel(int y, int x) noexcept {
        return {data_.data() + index(y, x), static_cast<std::size_t>(channels_)};
    }
    std::span<const double> pixel(int y, int x) const noexcept {
        return {data_.data() + index(y, x), static_cast<std::size_t>(channels_)};
    }

    std::vector<double> &data() noexcept { return data_; }
    const std::vector<double> &data() const noexcept { return data_; }

    bool same_shape(const Image &o) const noexcept {
        return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
    }
    bool all_finite() const noexcept;

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

/// Per-pixel boolean flags (1 = set).
struct Mask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> values;

    Mask() = default;
    Mask(int h, int w, bool fill) : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill ? 1 : 0) {}

    bool operator()(int y, int x) const noexcept { return values[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int y, int x, bool v) noexcept { values[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
    std::size_t count() const noexcept;
};

/// The four texels and weights a bilinear lookup touches.
struct BilinearFootprint {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;
    double tx = 0.0;
    double ty = 0.0;
    bool valid = false;
};

/// Valid iff `at` lies in [0, W-1] x [0, H-1].
BilinearFootprint bilinear_footprint(const Vec2 &at, int width, int height) noexcept;

/// Samples all channels into `out` (size = channels). Out-of-bounds writes zeros and returns false.
bool bilinear_sample(const Image &img, const Vec2 &at, std::span<double> out) noexcept;

struct Sample {
    std::vector<double> value;
    bool valid = false;
};
Sample bilinear_sample(const Image &img, const Vec2 &at);

} // namespace lm
