// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#include "lm/core.hpp"
#include "lm/image_io.hpp"

#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include <filesystem>
#include <random>

using namespace lm;

namespace {

CameraIntrinsics make_k(double f, double cx, double cy, int w = 128, int h = 128) {
    return CameraIntrinsics{f, f, cx, cy, w, h};
}

std::filesystem::path scratch(const char *name) {
    auto p = std::filesystem::temp_directory_path() / "lm_unit" / name;
    std::filesystem::create_directories(p.parent_path());
    return p;
}

} // namespace

TEST(Project, OpticalAxis) {
    const auto p = project({0, 0, 1}, make_k(1, 0, 0));
    EXPECT_EQ(p.x(), 0.0);
    EXPECT_EQ(p.y(), 0.0);
}

TEST(Project, HandEvaluated) {
    const auto p = project({1, 0, 10}, make_k(100, 50, 30));
    EXPECT_DOUBLE_EQ(p.x(), 60.0);
    EXPECT_DOUBLE_EQ(p.y(), 30.0);
}

TEST(Project, BehindCameraThrows) {
    try {
        project({0, 0, -1}, make_k(1, 0, 0));
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::NonPositiveDepth);
    }
}

TEST(Backproject, PrincipalPoint) {
    const auto p = backproject({50, 30}, 5, make_k(100, 50, 30));
    EXPECT_EQ(p, Vec3(0, 0, 5));
}

TEST(Backproject, InverseOfProjectExample) {
    const auto p = backproject({60, 30}, 10, make_k(100, 50, 30));
    EXPECT_NEAR(p.x(), 1.0, 1e-12);
    EXPECT_NEAR(p.y(), 0.0, 1e-12);
    EXPECT_DOUBLE_EQ(p.z(), 10.0);
}

TEST(Backproject, ZeroDepthThrows) {
    EXPECT_THROW(backproject({1, 1}, 0.0, make_k(1, 0, 0)), Error);
}

TEST(Backproject, RoundTripProperty) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 1000; ++i) {
        const int w = 16 + static_cast<int>(u(rng) * 500);
        const int h = 16 + static_cast<int>(u(rng) * 500);
        CameraIntrinsics k{10 + 1000 * u(rng), 10 + 1000 * u(rng), u(rng) * (w - 1), u(rng) * (h - 1), w, h};
        const Vec2 px(u(rng) * w, u(rng) * h);
        const double d = 0.01 + 100 * u(rng);
        const auto X = backproject(px, d, k);
        EXPECT_DOUBLE_EQ(X.z(), d);
        const auto q = project(X, k);
        ASSERT_NEAR(q.x(), px.x(), 1e-9);
        ASSERT_NEAR(q.y(), px.y(), 1e-9);
    }
}

TEST(Intrinsics, Validation) {
    EXPECT_NO_THROW(make_k(1, 0, 0).validate());
    EXPECT_THROW(make_k(0, 0, 0).validate(), Error);
    EXPECT_THROW(make_k(1, 128, 0).validate(), Error);
    EXPECT_THROW(make_k(1, -0.5, 0).validate(), Error);
}

TEST(RigidPose, RejectsNonRotation) {
    Mat3 r = Mat3::Identity();
    r(0, 0) = -1; // reflection
    EXPECT_THROW(RigidPose(r, Vec3::Zero()), Error);
    EXPECT_THROW(RigidPose(2 * Mat3::Identity(), Vec3::Zero()), Error);
}

TEST(RigidPose, CompositionStaysOrthonormal) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0, 1);
    RigidPose acc;
    for (int i = 0; i < 1000; ++i) {
        const Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
        const RigidPose step(q.normalized().toRotationMatrix(), Vec3(n(rng), n(rng), n(rng)));
        acc = step.compose(acc);
        ASSERT_TRUE(RigidPose::is_rotation(acc.rotation(), 1e-9));
    }
    const auto id = acc.compose(acc.inverse());
    EXPECT_TRUE(id.rotation().isApprox(Mat3::Identity(), 1e-9));
}

TEST(RigidPose, CenterMapsToOrigin) {
    const RigidPose p(Eigen::AngleAxisd(0.3, Vec3::UnitY()).toRotationMatrix(), Vec3(1, 2, 3));
    EXPECT_LT(p.apply(p.center()).norm(), 1e-12);
}

TEST(Bilinear, ExactOnIntegerCoordinates) {
    Image img(3, 4, 2);
    for (std::size_t i = 0; i < img.data().size(); ++i) img.data()[i] = 0.1 * static_cast<double>(i);
    for (int y = 0; y < 3; ++y) {
        for (int x = 0; x < 4; ++x) {
            const auto s = bilinear_sample(img, Vec2(x, y));
            ASSERT_TRUE(s.valid);
            EXPECT_EQ(s.value[0], img.at(y, x, 0));
            EXPECT_EQ(s.value[1], img.at(y, x, 1));
        }
    }
}

TEST(Bilinear, MidpointAndLinearity) {
    Image img(1, 2, 1);
    img.at(0, 1) = 1.0;
    EXPECT_DOUBLE_EQ(bilinear_sample(img, Vec2(0.5, 0)).value[0], 0.5);
    for (double t : {0.0, 0.125, 0.3, 0.9, 1.0}) {
        EXPECT_NEAR(bilinear_sample(img, Vec2(t, 0)).value[0], t, 1e-15);
    }
}

TEST(Bilinear, OutOfBoundsIsFlagged) {
    Image img(4, 4, 3, 0.7);
    const auto s = bilinear_sample(img, Vec2(-1, -1));
    EXPECT_FALSE(s.valid);
    for (double v : s.value) EXPECT_EQ(v, 0.0);
    EXPECT_FALSE(bilinear_sample(img, Vec2(3.0001, 0)).valid);
    EXPECT_TRUE(bilinear_sample(img, Vec2(3, 3)).valid);
}

TEST(ImageIo, PfmRoundTripIsBitExact) {
    Image img(5, 7, 3);
    std::mt19937 rng(1);
    std::uniform_real_distribution<float> u(-1e4f, 1e4f);
    for (auto &v : img.data()) v = static_cast<double>(u(rng));
    const auto p = scratch("rt.pfm");
    io::write_pfm(p, img);
    const auto back = io::read_pfm(p);
    ASSERT_TRUE(back.same_shape(img));
    EXPECT_EQ(back.data(), img.data());

    Image gray(3, 2, 1);
    gray.at(2, 1) = 0.25;
    io::write_pfm(p, gray);
    EXPECT_EQ(io::read_pfm(p).data(), gray.data());
}

TEST(ImageIo, PpmRoundTripOnQuantizedValues) {
    Image img(4, 3, 3);
    for (std::size_t i = 0; i < img.data().size(); ++i) img.data()[i] = static_cast<double>(i * 7 % 256) / 255.0;
    const auto p = scratch("rt.ppm");
    io::write_ppm(p, img);
    const auto back = io::read_ppm(p);
    ASSERT_TRUE(back.same_shape(img));
    for (std::size_t i = 0; i < img.data().size(); ++i) EXPECT_NEAR(back.data()[i], img.data()[i], 1e-12);
}

TEST(ImageIo, Quantize) {
    EXPECT_EQ(io::quantize_unit(-1), 0);
    EXPECT_EQ(io::quantize_unit(2), 255);
    EXPECT_EQ(io::quantize_unit(0.5), 128); // 127.5 rounds to even
    EXPECT_EQ(io::quantize_unit(1.0), 255);
}

TEST(ImageIo, MissingFileIsIoError) {
    try {
        io::read_ppm("/nonexistent/x.ppm");
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::IoError);
    }
}
