// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#include "lm/texture.hpp"

#include "lm/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace lm {

std::string_view to_string(TextureScheme s) {
    switch (s) {
    case TextureScheme::RSBg: return "RSBg";
    case TextureScheme::RBg: return "RBg";
    case TextureScheme::RAW: return "RAW";
    }
    return "?";
}

TextureScheme parse_texture_scheme(std::string_view s) {
    if (s == "rsbg" || s == "RSBg") return TextureScheme::RSBg;
    if (s == "rbg" || s == "RBg") return TextureScheme::RBg;
    if (s == "raw" || s == "RAW") return TextureScheme::RAW;
    throw Error(ErrorCode::InvalidConfig, "unknown texture scheme '" + std::string(s) + "'");
}

ColoringOutput ColoringOutput::make(TextureScheme scheme, int h, int w, int layers, WeightForm form) {
    ColoringOutput c;
    c.scheme = scheme;
    c.form = form;
    c.height = h;
    c.width = w;
    c.layers = layers;
    const std::size_t slots = static_cast<std::size_t>(h) * w * layers;
    if (scheme == TextureScheme::RAW) {
        c.colors.assign(slots * 3, 0.0);
    } else {
        c.background = Image(h, w, 3);
        c.weights.assign(slots * static_cast<std::size_t>(c.weight_count()), 0.0);
    }
    c.alphas.assign(slots, 1.0);
    return c;
}

int ColoringOutput::weight_count() const noexcept {
    switch (scheme) {
    case TextureScheme::RSBg: return 3;
    case TextureScheme::RBg: return 2;
    case TextureScheme::RAW: return 0;
    }
    return 0;
}

void ColoringOutput::validate() const {
    const std::size_t slots = static_cast<std::size_t>(height) * width * layers;
    bool ok = layers >= 1 && alphas.size() == slots;
    if (scheme == TextureScheme::RAW) {
        ok = ok && colors.size() == slots * 3;
    } else {
        ok = ok && background.height() == height && background.width() == width && background.channels() == 3 &&
             weights.size() == slots * static_cast<std::size_t>(weight_count());
    }
    if (!ok) {
        throw Error(ErrorCode::SchemeShapeMismatch,
                    "colouring output arrays do not match scheme " + std::string(to_string(scheme)));
    }
    for (double a : alphas) {
        if (!(a >= 0.0 && a <= 1.0)) {
            throw Error(ErrorCode::AlphaOutOfRange, "alpha " + std::to_string(a) + " outside [0,1]");
        }
    }
    if (form == WeightForm::Simplex) {
        const int k = weight_count();
        for (std::size_t s = 0; s < slots && k > 0; ++s) {
            double sum = 0.0;
            for (int i = 0; i < k; ++i) {
                const double w = weights[s * k + i];
                if (!(w >= 0.0)) {
                    throw Error(ErrorCode::InvalidScene, "negative blend weight");
                }
                sum += w;
            }
            if (std::abs(sum - 1.0) > 1e-9) {
                throw Error(ErrorCode::InvalidScene, "blend weights do not sum to one");
            }
        }
    }
}

void TexturedScene::validate() const {
    if (meshes.layers.empty()) {
        throw Error(ErrorCode::InvalidScene, "scene has no layers");
    }
    if (textures.size() != meshes.layers.size()) {
        throw Error(ErrorCode::InvalidScene, "texture count differs from layer count");
    }
    for (const auto &t : textures) {
        if (t.channels() != 4 || t.height() != meshes.reference.height || t.width() != meshes.reference.width) {
            throw Error(ErrorCode::InvalidScene, "textures must be RGBA at the reference resolution");
        }
    }
}

std::vector<WarpResult> unproject_side_onto_layers(const Image &side, const CameraRig &rig,
                                                   const LayeredMeshSet &meshes, int threads) {
    const int h = meshes.reference.height;
    const int w = meshes.reference.width;
    std::vector<WarpResult> out(meshes.layers.size());
    parallel_for(meshes.layers.size(), threads, [&](std::size_t j) {
        WarpResult res{Image(h, w, side.channels()), Mask(h, w, false)};
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const Vec2 p(x, y);
                const double depth = layer_depth_at(meshes, static_cast<int>(j), p);
                const Vec3 in_side = rig.side.pose.apply(pixel_ray(p, rig.reference) * depth);
                if (!(in_side.z() > 0.0)) {
                    continue;
                }
                res.valid.set(y, x, bilinear_sample(side, project(in_side, rig.side.intrinsics), res.image.pixel(y, x)));
            }
        }
        out[j] = std::move(res);
    });
    return out;
}

TexturedScene blend_textures(const ColoringOutput &coloring, const Image &reference,
                             const std::vector<WarpResult> &side_layers, const LayeredMeshSet &meshes) {
    coloring.validate();
    const int h = coloring.height;
    const int w = coloring.width;
    const int layers = coloring.layers;
    if (layers != meshes.layer_count() || h != meshes.reference.height || w != meshes.reference.width) {
        throw Error(ErrorCode::SchemeShapeMismatch, "colouring output does not match the layered mesh");
    }
    if (coloring.scheme != TextureScheme::RAW &&
        (reference.height() != h || reference.width() != w || reference.channels() != 3)) {
        throw Error(ErrorCode::SchemeShapeMismatch, "reference view does not match the colouring grid");
    }
    const bool uses_side = coloring.scheme == TextureScheme::RSBg;
    if (uses_side) {
        if (side_layers.size() != static_cast<std::size_t>(layers)) {
            throw Error(ErrorCode::SchemeShapeMismatch, "RSBg needs one unprojected side image per layer");
        }
        for (const auto &s : side_layers) {
            if (s.image.height() != h || s.image.width() != w || s.image.channels() != 3) {
                throw Error(ErrorCode::SchemeShapeMismatch, "unprojected side image has the wrong shape");
            }
        }
    }

    TexturedScene scene;
    scene.meshes = meshes;
    scene.textures.assign(static_cast<std::size_t>(layers), Image(h, w, 4));
    const int k = coloring.weight_count();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int j = 0; j < layers; ++j) {
                Image &tex = scene.textures[static_cast<std::size_t>(j)];
                const std::size_t s = coloring.slot(y, x, j);
                if (coloring.scheme == TextureScheme::RAW) {
                    for (int c = 0; c < 3; ++c) {
                        tex.at(y, x, c) = std::clamp(coloring.colors[s * 3 + c], 0.0, 1.0);
                    }
                } else {
                    // Slots: 0 = reference, 1 = side (RSBg only), last = background.
                    std::array<double, 3> wt{};
                    std::array<bool, 3> on{true, true, true};
                    const int bg = k - 1;
                    if (uses_side && !side_layers[static_cast<std::size_t>(j)].valid(y, x)) {
                        on[1] = false;
                    }
                    double sum = 0.0;
                    if (coloring.form == WeightForm::Logits) {
                        double mx = -1e300;
                        for (int i = 0; i < k; ++i) {
                            if (on[i]) mx = std::max(mx, coloring.weights[s * k + i]);
                        }
                        for (int i = 0; i < k; ++i) {
                            wt[i] = on[i] ? std::exp(coloring.weights[s * k + i] - mx) : 0.0;
                            sum += wt[i];
                        }
                    } else {
                        for (int i = 0; i < k; ++i) {
                            wt[i] = on[i] ? coloring.weights[s * k + i] : 0.0;
                            sum += wt[i];
                        }
                        if (sum <= 0.0) {
                            wt[0] = 1.0;
                            sum = 1.0;
                        }
                    }
                    for (int c = 0; c < 3; ++c) {
                        double v = wt[0] * reference.at(y, x, c) + wt[bg] * coloring.background.at(y, x, c);
                        if (uses_side) {
                            v += wt[1] * side_layers[static_cast<std::size_t>(j)].image.at(y, x, c);
                        }
                        tex.at(y, x, c) = std::clamp(v / sum, 0.0, 1.0);
                    }
                }
                tex.at(y, x, 3) = coloring.alphas[s];
            }
        }
    }
    return scene;
}

OpacityReport zero_out_check(const TexturedScene &scene, double threshold) {
    OpacityReport report;
    report.threshold = threshold;
    for (const auto &tex : scene.textures) {
        double sum = 0.0;
        for (int y = 0; y < tex.height(); ++y) {
            for (int x = 0; x < tex.width(); ++x) {
                sum += tex.at(y, x, 3);
            }
        }
        const double mean = tex.pixel_count() ? sum / static_cast<double>(tex.pixel_count()) : 0.0;
        report.mean_alpha.push_back(mean);
        report.redundant.push_back(mean < threshold);
    }
    return report;
}

} // namespace lm
