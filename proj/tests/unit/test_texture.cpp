// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#include "lm/texture.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace lm;

namespace {

CameraRig make_rig(int w, int h, double f, const Vec3 &t) {
    CameraRig rig;
    rig.reference = CameraIntrinsics{f, f, (w - 1) / 2.0, (h - 1) / 2.0, w, h};
    rig.side = Camera{rig.reference, RigidPose::translation_only(t)};
    rig.novel = rig.side;
    return rig;
}

LayeredMeshSet planes_mesh(const CameraIntrinsics &k, std::initializer_list<double> depths) {
    DepthLayerSet d(static_cast<int>(depths.size()), k.height, k.width, DepthScheme::BI);
    int j = 0;
    for (double v : depths) {
        std::fill(d.depths.begin() + static_cast<std::ptrdiff_t>(d.index(j, 0, 0)),
                  d.depths.begin() + static_cast<std::ptrdiff_t>(d.index(j + 1, 0, 0)), v);
        ++j;
    }
    return mesh_layers(d, k);
}

Image random_rgb(int h, int w, std::uint32_t seed) {
    Image img(h, w, 3);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    for (auto &v : img.data()) v = u(rng);
    return img;
}

std::vector<WarpResult> uniform_side(int layers, int h, int w, double v) {
    return std::vector<WarpResult>(static_cast<std::size_t>(layers), WarpResult{Image(h, w, 3, v), Mask(h, w, true)});
}

} // namespace

TEST(Unproject, IdentityRigReturnsSide) {
    const auto rig = make_rig(10, 7, 12, Vec3::Zero());
    const auto side = random_rgb(7, 10, 1);
    const auto out = unproject_side_onto_layers(side, rig, planes_mesh(rig.reference, {1.5, 4.0}));
    ASSERT_EQ(out.size(), 2u);
    for (const auto &l : out) {
        EXPECT_EQ(l.valid.count(), 70u);
        for (std::size_t i = 0; i < side.data().size(); ++i) ASSERT_NEAR(l.image.data()[i], side.data()[i], 1e-12);
    }
}

TEST(Unproject, TranslationShiftsByLayerDisparity) {
    const int w = 20, h = 6;
    const auto rig = make_rig(w, h, 100, Vec3(0.1, 0, 0));
    const auto side = random_rgb(h, w, 2);
    const auto out = unproject_side_onto_layers(side, rig, planes_mesh(rig.reference, {5.0, 10.0}));
    // disparity 100 * 0.1 / d: 2 px on layer 0, 1 px on layer 1
    for (int j = 0; j < 2; ++j) {
        const int shift = j == 0 ? 2 : 1;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (x + shift < w) {
                    ASSERT_TRUE(out[j].valid(y, x));
                    for (int c = 0; c < 3; ++c) ASSERT_NEAR(out[j].image.at(y, x, c), side.at(y, x + shift, c), 1e-9);
                } else {
                    ASSERT_FALSE(out[j].valid(y, x));
                    for (int c = 0; c < 3; ++c) ASSERT_EQ(out[j].image.at(y, x, c), 0.0);
                }
            }
        }
    }
}

TEST(Blend, ReferenceOnlyWeights) {
    const auto rig = make_rig(6, 5, 10, Vec3::Zero());
    const auto mesh = planes_mesh(rig.reference, {2.0, 3.0});
    const auto ref = random_rgb(5, 6, 3);
    auto col = ColoringOutput::make(TextureScheme::RSBg, 5, 6, 2, WeightForm::Simplex);
    col.background = Image(5, 6, 3, 0.9);
    for (int y = 0; y < 5; ++y) {
        for (int x = 0; x < 6; ++x) {
            for (int j = 0; j < 2; ++j) {
                col.weight(y, x, j, 0) = 1;
                col.weight(y, x, j, 1) = 0;
                col.weight(y, x, j, 2) = 0;
                col.alpha(y, x, j) = 0.25 * (j + 1);
            }
        }
    }
    const auto scene = blend_textures(col, ref, uniform_side(2, 5, 6, 0.1), mesh);
    for (int j = 0; j < 2; ++j) {
        for (int y = 0; y < 5; ++y) {
            for (int x = 0; x < 6; ++x) {
                for (int c = 0; c < 3; ++c) ASSERT_DOUBLE_EQ(scene.textures[j].at(y, x, c), ref.at(y, x, c));
                ASSERT_EQ(scene.textures[j].at(y, x, 3), 0.25 * (j + 1));
            }
        }
    }
}

TEST(Blend, EqualWeightsGiveTheMean) {
    const auto rig = make_rig(3, 2, 10, Vec3::Zero());
    const auto mesh = planes_mesh(rig.reference, {2.0});
    for (auto form : {WeightForm::Logits, WeightForm::Simplex}) {
        auto col = ColoringOutput::make(TextureScheme::RSBg, 2, 3, 1, form);
        col.background = Image(2, 3, 3, 0.5);
        std::fill(col.weights.begin(), col.weights.end(), 1.0 / 3.0);
        const auto scene = blend_textures(col, Image(2, 3, 3, 1.0), uniform_side(1, 2, 3, 0.0), mesh);
        for (int i = 0; i < 6; ++i) EXPECT_NEAR(scene.textures[0].data()[i * 4], 0.5, 1e-15);
    }
}

TEST(Blend, RawIsClamped) {
    const auto rig = make_rig(2, 2, 10, Vec3::Zero());
    const auto mesh = planes_mesh(rig.reference, {2.0});
    auto col = ColoringOutput::make(TextureScheme::RAW, 2, 2, 1);
    std::fill(col.colors.begin(), col.colors.end(), 1.2);
    col.colors[1] = -0.3;
    col.colors[2] = 0.4;
    const auto scene = blend_textures(col, Image(2, 2, 3), {}, mesh);
    EXPECT_EQ(scene.textures[0].at(0, 0, 0), 1.0);
    EXPECT_EQ(scene.textures[0].at(0, 0, 1), 0.0);
    EXPECT_EQ(scene.textures[0].at(0, 0, 2), 0.4);
}

TEST(Blend, ShapeMismatch) {
    const auto rig = make_rig(4, 4, 10, Vec3::Zero());
    const auto mesh = planes_mesh(rig.reference, {2.0, 3.0});
    auto col = ColoringOutput::make(TextureScheme::RSBg, 4, 4, 1);
    col.background = Image(4, 4, 3);
    try {
        blend_textures(col, Image(4, 4, 3), uniform_side(1, 4, 4, 0), mesh);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::SchemeShapeMismatch);
    }
    auto wrong = ColoringOutput::make(TextureScheme::RBg, 4, 4, 2);
    wrong.weights.pop_back();
    EXPECT_THROW(blend_textures(wrong, Image(4, 4, 3), {}, mesh), Error);
}

TEST(Blend, InvalidSideTexelsAreExcluded) {
    const auto rig = make_rig(2, 1, 10, Vec3::Zero());
    const auto mesh = planes_mesh(rig.reference, {2.0});
    auto col = ColoringOutput::make(TextureScheme::RSBg, 1, 2, 1);
    col.background = Image(1, 2, 3, 0.0);
    std::fill(col.weights.begin(), col.weights.end(), 0.0); // uniform softmax
    auto side = uniform_side(1, 1, 2, 0.9);
    side[0].valid.set(0, 1, false);
    const auto s = blend_textures(col, Image(1, 2, 3, 0.6), side, mesh);
    EXPECT_NEAR(s.textures[0].at(0, 0, 0), 0.5, 1e-15); // (0.6 + 0.9 + 0) / 3
    EXPECT_NEAR(s.textures[0].at(0, 1, 0), 0.3, 1e-15); // (0.6 + 0) / 2
}

TEST(Blend, ConvexAndLinearProperties) {
    const int h = 4, w = 5, layers = 3;
    const auto rig = make_rig(w, h, 10, Vec3::Zero());
    const auto mesh = planes_mesh(rig.reference, {2.0, 3.0, 5.0});
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(0, 2);
    for (auto scheme : {TextureScheme::RSBg, TextureScheme::RBg}) {
        auto col = ColoringOutput::make(scheme, h, w, layers);
        for (auto &v : col.weights) v = n(rng);
        col.background = random_rgb(h, w, 11);
        const auto ref = random_rgb(h, w, 12);
        std::vector<WarpResult> side;
        for (int j = 0; j < layers; ++j) side.push_back({random_rgb(h, w, 20 + j), Mask(h, w, true)});
        const auto s = blend_textures(col, ref, side, mesh);
        for (int j = 0; j < layers; ++j) {
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    for (int c = 0; c < 3; ++c) {
                        double lo = std::min(ref.at(y, x, c), col.background.at(y, x, c));
                        double hi = std::max(ref.at(y, x, c), col.background.at(y, x, c));
                        if (scheme == TextureScheme::RSBg) {
                            lo = std::min(lo, side[j].image.at(y, x, c));
                            hi = std::max(hi, side[j].image.at(y, x, c));
                        }
                        const double v = s.textures[j].at(y, x, c);
                        ASSERT_GE(v, lo - 1e-12);
                        ASSERT_LE(v, hi + 1e-12);
                    }
                }
            }
        }
        // linear in each input: scaling every image by 0.5 halves the colour
        auto half_col = col;
        for (auto &v : half_col.background.data()) v *= 0.5;
        auto half_ref = ref;
        for (auto &v : half_ref.data()) v *= 0.5;
        auto half_side = side;
        for (auto &l : half_side) {
            for (auto &v : l.image.data()) v *= 0.5;
        }
        const auto hs = blend_textures(half_col, half_ref, half_side, mesh);
        for (int j = 0; j < layers; ++j) {
            for (std::size_t i = 0; i < hs.textures[j].data().size(); ++i) {
                if (i % 4 == 3) continue;
                ASSERT_NEAR(hs.textures[j].data()[i], 0.5 * s.textures[j].data()[i], 1e-12);
            }
        }
    }
}

TEST(Blend, ZeroBackgroundWeightIgnoresBackground) {
    const auto rig = make_rig(3, 3, 10, Vec3::Zero());
    const auto mesh = planes_mesh(rig.reference, {2.0});
    auto col = ColoringOutput::make(TextureScheme::RSBg, 3, 3, 1, WeightForm::Simplex);
    for (int i = 0; i < 9; ++i) {
        col.weights[i * 3] = 0.3;
        col.weights[i * 3 + 1] = 0.7;
        col.weights[i * 3 + 2] = 0.0;
    }
    col.background = random_rgb(3, 3, 1);
    const auto a = blend_textures(col, random_rgb(3, 3, 2), uniform_side(1, 3, 3, 0.2), mesh);
    col.background = random_rgb(3, 3, 3);
    const auto b = blend_textures(col, random_rgb(3, 3, 2), uniform_side(1, 3, 3, 0.2), mesh);
    EXPECT_EQ(a.textures[0].data(), b.textures[0].data());
}

TEST(ZeroOut, Report) {
    const auto rig = make_rig(2, 2, 10, Vec3::Zero());
    TexturedScene s;
    s.meshes = planes_mesh(rig.reference, {2.0, 3.0, 4.0});
    s.textures = {Image(2, 2, 4, 1.0), Image(2, 2, 4, 0.0), Image(2, 2, 4, 0.0)};
    const double alphas[] = {0.1, 0.2, 0.4, 0.7};
    for (int i = 0; i < 4; ++i) s.textures[2].data()[i * 4 + 3] = alphas[i];
    const auto r = zero_out_check(s);
    EXPECT_EQ(r.mean_alpha[0], 1.0);
    EXPECT_EQ(r.mean_alpha[1], 0.0);
    EXPECT_DOUBLE_EQ(r.mean_alpha[2], (0.1 + 0.2 + 0.4 + 0.7) / 4);
    EXPECT_FALSE(r.redundant[0]);
    EXPECT_TRUE(r.redundant[1]);
    EXPECT_FALSE(r.redundant[2]);
}
