// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#include "lm/core.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace lm {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::InvalidIntrinsics: return "InvalidIntrinsics";
    case ErrorCode::InvalidPose: return "InvalidPose";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::TooFewPlanes: return "TooFewPlanes";
    case ErrorCode::IndivisibleGroups: return "IndivisibleGroups";
    case ErrorCode::BetaOutOfRange: return "BetaOutOfRange";
    case ErrorCode::SchemeShapeMismatch: return "SchemeShapeMismatch";
    case ErrorCode::RowOutOfRange: return "RowOutOfRange";
    case ErrorCode::AlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorCode::DegenerateCamera: return "DegenerateCamera";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ConventionMismatch: return "ConventionMismatch";
    case ErrorCode::SingleLayer: return "SingleLayer";
    case ErrorCode::DegenerateGrid: return "DegenerateGrid";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::CropTooLarge: return "CropTooLarge";
    case ErrorCode::DepthOutOfRange: return "DepthOutOfRange";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidScene: return "InvalidScene";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatError: return "FormatError";
    }
    return "Unknown";
}

bool CameraIntrinsics::is_valid() const noexcept {
    return std::isfinite(fx) && std::isfinite(fy) && fx > 0.0 && fy > 0.0 && width > 0 && height > 0 &&
           cx >= 0.0 && cx < width && cy >= 0.0 && cy < height;
}

void CameraIntrinsics::validate() const {
    if (!is_valid()) {
        std::ostringstream os;
        os << "fx=" << fx << " fy=" << fy << " cx=" << cx << " cy=" << cy << " size=" << width << "x"
           << height;
        throw Error(ErrorCode::InvalidIntrinsics, os.str());
    }
}

Mat3 CameraIntrinsics::matrix() const {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
}

Mat3 CameraIntrinsics::inverse_matrix() const {
    Mat3 k;
    k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
    return k;
}

bool RigidPose::is_rotation(const Mat3 &r, double tol) {
    if (!r.allFinite()) {
        return false;
    }
    const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
    return ortho <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

RigidPose::RigidPose(const Mat3 &rotation, const Vec3 &translation)
    : rotation_(rotation), translation_(translation) {
    if (!is_rotation(rotation) || !translation.allFinite()) {
        throw Error(ErrorCode::InvalidPose, "rotation must be orthonormal with determinant +1");
    }
}

RigidPose RigidPose::compose(const RigidPose &first) const {
    RigidPose out;
    out.rotation_ = rotation_ * first.rotation_;
    out.translation_ = rotation_ * first.translation_ + translation_;
    return out;
}

RigidPose RigidPose::inverse() const {
    RigidPose out;
    out.rotation_ = rotation_.transpose();
    out.translation_ = -(rotation_.transpose() * translation_);
    return out;
}

Vec2 project(const Vec3 &point, const CameraIntrinsics &k) {
    if (!(point.z() > 0.0)) {
        throw Error(ErrorCode::NonPositiveDepth, "cannot project a point with z <= 0");
    }
    return {k.fx * point.x() / point.z() + k.cx, k.fy * point.y() / point.z() + k.cy};
}

Vec3 backproject(const Vec2 &pixel, double depth, const CameraIntrinsics &k) {
    if (!(depth > 0.0)) {
        throw Error(ErrorCode::NonPositiveDepth, "backprojection depth must be positive");
    }
    return pixel_ray(pixel, k) * depth;
}

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
    if (height < 0 || width < 0 || channels < 0) {
        throw Error(ErrorCode::ShapeMismatch, "negative image dimension");
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

bool Image::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::size_t Mask::count() const noexcept {
    return static_cast<std::size_t>(std::count(values.begin(), values.end(), std::uint8_t{1}));
}

BilinearFootprint bilinear_footprint(const Vec2 &at, int width, int height) noexcept {
    BilinearFootprint f;
    const double x = at.x();
    const double y = at.y();
    // Round-off from a reprojection that should land exactly on the border
    // (identity rigs, the last row/column) must not flip validity.
    constexpr double slack = 1e-9;
    if (!(x >= -slack && y >= -slack && x <= width - 1 + slack && y <= height - 1 + slack)) {
        return f;
    }
    // Keep x0 <= W-2 so the right edge interpolates with full weight on x1.
    f.x0 = width > 1 ? std::clamp(static_cast<int>(x), 0, width - 2) : 0;
    f.y0 = height > 1 ? std::clamp(static_cast<int>(y), 0, height - 2) : 0;
    f.x1 = width > 1 ? f.x0 + 1 : 0;
    f.y1 = height > 1 ? f.y0 + 1 : 0;
    f.tx = width > 1 ? x - f.x0 : 0.0;
    f.ty = height > 1 ? y - f.y0 : 0.0;
    f.valid = true;
    return f;
}

bool bilinear_sample(const Image &img, const Vec2 &at, std::span<double> out) noexcept {
    const auto f = bilinear_footprint(at, img.width(), img.height());
    const int c = img.channels();
    if (!f.valid) {
        std::fill(out.begin(), out.end(), 0.0);
        return false;
    }
    const double w00 = (1.0 - f.tx) * (1.0 - f.ty);
    const double w10 = f.tx * (1.0 - f.ty);
    const double w01 = (1.0 - f.tx) * f.ty;
    const double w11 = f.tx * f.ty;
    const double *p00 = img.data().data() + img.index(f.y0, f.x0);
    const double *p10 = img.data().data() + img.index(f.y0, f.x1);
    const double *p01 = img.data().data() + img.index(f.y1, f.x0);
    const double *p11 = img.data().data() + img.index(f.y1, f.x1);
    for (int ch = 0; ch < c; ++ch) {
        out[ch] = w00 * p00[ch] + w10 * p10[ch] + w01 * p01[ch] + w11 * p11[ch];
    }
    return true;
}

Sample bilinear_sample(const Image &img, const Vec2 &at) {
    Sample s;
    s.value.resize(static_cast<std::size_t>(img.channels()));
    s.valid = bilinear_sample(img, at, s.value);
    return s;
}

} // namespace lm
