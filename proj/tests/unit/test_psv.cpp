// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#include "lm/psv.hpp"
#include "lm/scenegen.hpp"

#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <random>

using namespace lm;

namespace {

Image random_rgb(int h, int w, std::uint32_t seed) {
    Image img(h, w, 3);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    for (auto &v : img.data()) v = u(rng);
    return img;
}

CameraRig translated_rig(double f, int w, int h, const Vec3 &t) {
    CameraRig rig;
    rig.reference = CameraIntrinsics{f, f, (w - 1) / 2.0, (h - 1) / 2.0, w, h};
    rig.side = Camera{rig.reference, RigidPose::translation_only(t)};
    rig.novel = rig.side;
    return rig;
}

} // namespace

TEST(PlacePlanes, Endpoints) {
    const auto p = place_planes(1, 100, 2);
    ASSERT_EQ(p.size(), 2u);
    EXPECT_DOUBLE_EQ(p[0], 1.0);
    EXPECT_DOUBLE_EQ(p[1], 100.0);
}

TEST(PlacePlanes, InverseDepthMidpoint) {
    const auto p = place_planes(1, 8, 3);
    ASSERT_EQ(p.size(), 3u);
    EXPECT_DOUBLE_EQ(p[0], 1.0);
    EXPECT_NEAR(p[1], 1.0 / 0.5625, 1e-12);
    EXPECT_NEAR(p[1], 1.7778, 5e-5);
    EXPECT_DOUBLE_EQ(p[2], 8.0);
}

TEST(PlacePlanes, Errors) {
    try {
        place_planes(2, 2, 4);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidRange);
    }
    EXPECT_THROW(place_planes(0, 2, 4), Error);
    EXPECT_THROW(place_planes(3, 2, 4), Error);
    try {
        place_planes(1, 2, 1);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::TooFewPlanes);
    }
}

TEST(PlacePlanes, ArithmeticInInverseDepth) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.01, 50);
    for (int trial = 0; trial < 200; ++trial) {
        const double a = u(rng);
        const double b = a + u(rng);
        const int n = 2 + trial % 60;
        const auto p = place_planes(a, b, n);
        const double step = (1 / p[0] - 1 / p[n - 1]) / (n - 1);
        for (int k = 1; k < n; ++k) {
            ASSERT_LT(p[k - 1], p[k]);
            ASSERT_NEAR(1 / p[k - 1] - 1 / p[k], step, 1e-9);
        }
    }
}

TEST(Warp, IdentityRigReproducesSide) {
    const auto side = random_rgb(9, 11, 1);
    const auto rig = translated_rig(20, 11, 9, Vec3::Zero());
    for (double d : {0.5, 3.0, 80.0}) {
        const auto w = warp_side_to_plane(side, rig, d, 9, 11);
        EXPECT_EQ(w.valid.count(), 99u);
        for (std::size_t i = 0; i < side.data().size(); ++i) ASSERT_NEAR(w.image.data()[i], side.data()[i], 1e-12);
    }
}

TEST(Warp, PureTranslationShiftsByDisparity) {
    const int h = 8, w = 16;
    const auto side = random_rgb(h, w, 2);
    const auto rig = translated_rig(100, w, h, Vec3(0.1, 0, 0));
    const auto out = warp_side_to_plane(side, rig, 10.0, h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (x + 1 < w) {
                ASSERT_TRUE(out.valid(y, x));
                for (int c = 0; c < 3; ++c) ASSERT_NEAR(out.image.at(y, x, c), side.at(y, x + 1, c), 1e-9);
            } else {
                EXPECT_FALSE(out.valid(y, x));
            }
        }
    }
}

TEST(Warp, NonPositiveDepthThrows) {
    const auto rig = translated_rig(10, 4, 4, Vec3(0.1, 0, 0));
    try {
        warp_side_to_plane(Image(4, 4, 3), rig, -1.0, 4, 4);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::NonPositiveDepth);
    }
}

// The closed-form homography and the backproject/transform/project chain
// must agree, and the warp must sample exactly where they point.
TEST(Warp, HomographyAgreesWithPointPath) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 1);
    std::normal_distribution<double> n(0, 1);
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int w = 12, h = 10;
        CameraIntrinsics kr{20 + 40 * u(rng), 20 + 40 * u(rng), 3 + 5 * u(rng), 3 + 4 * u(rng), w, h};
        CameraIntrinsics ks{20 + 40 * u(rng), 20 + 40 * u(rng), 3 + 5 * u(rng), 3 + 4 * u(rng), w, h};
        const Mat3 r = Eigen::AngleAxisd(0.1 * n(rng), Vec3(n(rng), n(rng), n(rng)).normalized()).toRotationMatrix();
        const Vec3 t(0.2 * n(rng), 0.2 * n(rng), 0.05 * n(rng));
        CameraRig rig{kr, Camera{ks, RigidPose(r, t)}, Camera{ks, RigidPose(r, t)}};
        const double d = 1 + 20 * u(rng);
        const Mat3 hom = plane_homography(kr, rig.side, d);
        const auto side = random_rgb(h, w, static_cast<std::uint32_t>(trial));
        const auto warped = warp_side_to_plane(side, rig, d, h, w);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const Vec3 X = rig.side.pose.apply(backproject(Vec2(x, y), d, kr));
                const Vec2 chain = project(X, ks);
                const Vec3 q = hom * Vec3(x, y, 1);
                const Vec2 via_h = q.head<2>() / q.z();
                worst = std::max(worst, (chain - via_h).norm());
                const auto s = bilinear_sample(side, via_h);
                ASSERT_EQ(s.valid, warped.valid(y, x));
                for (int c = 0; c < 3; ++c) ASSERT_NEAR(warped.image.at(y, x, c), s.value[c], 1e-6);
            }
        }
    }
    EXPECT_LT(worst, 1e-6);
}

TEST(Warp, ZeroBaselineIsFullyValid) {
    const auto side = random_rgb(6, 6, 3);
    auto rig = translated_rig(10, 6, 6, Vec3::Zero());
    std::size_t prev = 36;
    EXPECT_EQ(warp_side_to_plane(side, rig, 2.0, 6, 6).valid.count(), 36u);
    // shrinking the baseline never loses valid pixels
    for (double b : {0.3, 0.2, 0.1, 0.05, 0.0}) {
        rig.side.pose = RigidPose::translation_only(Vec3(b, 0, 0));
        const auto n = warp_side_to_plane(side, rig, 2.0, 6, 6).valid.count();
        if (b < 0.3) {
            EXPECT_GE(n, prev);
        }
        prev = n;
    }
    EXPECT_EQ(prev, 36u);
}

TEST(BuildPsv, StructureAndOrdering) {
    const auto ref = random_rgb(5, 7, 4);
    const auto side = random_rgb(5, 7, 5);
    const auto rig = translated_rig(10, 7, 5, Vec3::Zero());
    const auto planes = place_planes(1, 10, 2);
    const auto vol = build_psv(ref, side, rig, planes);
    ASSERT_EQ(vol.slabs.size(), 2u);
    ASSERT_EQ(vol.valid.size(), 2u);
    EXPECT_EQ(vol.reference.data(), ref.data());
    for (const auto &s : vol.slabs) {
        for (std::size_t i = 0; i < side.data().size(); ++i) ASSERT_NEAR(s.data()[i], side.data()[i], 1e-12);
    }
    EXPECT_EQ(vol.planes.nearest(), 1.0);
    EXPECT_EQ(vol.planes.farthest(), 10.0);
}

TEST(BuildPsv, ThreadCountDoesNotChangeResult) {
    const auto ref = random_rgb(16, 20, 6);
    const auto side = random_rgb(16, 20, 7);
    const auto rig = translated_rig(30, 20, 16, Vec3(0.2, 0.05, 0));
    const auto planes = place_planes(1, 20, 8);
    const auto a = build_psv(ref, side, rig, planes, 1);
    const auto b = build_psv(ref, side, rig, planes, 3);
    for (std::size_t k = 0; k < 8; ++k) {
        EXPECT_EQ(a.slabs[k].data(), b.slabs[k].data());
        EXPECT_EQ(a.valid[k].values, b.valid[k].values);
    }
}

// A single textured fronto-parallel plane at depth d_k: slab k must be
// photoconsistent with the reference view wherever it is valid.
TEST(BuildPsv, PlaneSceneIsPhotoconsistentAtItsDepth) {
    SceneSpec spec;
    spec.layers = 1;
    spec.width = 64;
    spec.height = 48;
    spec.baseline = 0.125; // disparity 64 * 0.125 / 4 = 2 px at depth 4
    LayerSpec layer;
    layer.depth = DepthPattern::Constant;
    layer.texture = TexturePattern::Noise;
    layer.alpha = AlphaPattern::Opaque;
    layer.base_depth = 4.0;
    spec.layer_specs = {layer};
    const auto scene = generate(3, spec);
    const auto views = ground_truth_views(scene);
    const PlaneStack planes({2.0, 4.0, 8.0});
    const auto vol = build_psv(views.reference, views.side, scene.rig, planes);
    double worst = 0;
    std::size_t valid = 0;
    for (int y = 0; y < 48; ++y) {
        for (int x = 0; x < 64; ++x) {
            if (!vol.valid[1](y, x)) continue;
            ++valid;
            for (int c = 0; c < 3; ++c) {
                worst = std::max(worst, std::abs(vol.slabs[1].at(y, x, c) - views.reference.at(y, x, c)));
            }
        }
    }
    EXPECT_GT(valid, 48u * 60u);
    EXPECT_LT(worst, 1e-3);
    // the wrong planes are visibly inconsistent
    double off = 0;
    for (std::size_t i = 0; i < views.reference.data().size(); ++i) {
        off = std::max(off, std::abs(vol.slabs[0].data()[i] - views.reference.data()[i]));
    }
    EXPECT_GT(off, 0.05);
}
