// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "lm/core.hpp"
#include "lm/meshing.hpp"
#include "lm/psv.hpp"

#include <string_view>
#include <vector>

namespace lm {

/// Colour schemes: blend Reference/Side/Background, Reference/Background, or raw colours.
enum class TextureScheme { RSBg, RBg, RAW };

std::string_view to_string(TextureScheme s);
TextureScheme parse_texture_scheme(std::string_view s);

/// Blend weights are either raw scores (softmax-normalised per pixel and
/// layer) or already on the probability simplex.
enum class WeightForm { Logits, Simplex };

/// Output of a colouring predictor over the H x W reference grid and L layers.
/// Per-pixel arrays are indexed (y, x, layer, component).
struct ColoringOutput {
    TextureScheme scheme = TextureScheme::RSBg;
    WeightForm form = WeightForm::Logits;
    int height = 0;
    int width = 0;
    int layers = 0;
    Image background;            // H x W x 3; RSBg and RBg only
    std::vector<double> weights; // RSBg: (R, S, Bg); RBg: (R, Bg)
    std::vector<double> colors;  // RAW only, 3 per pixel and layer
    std::vector<double> alphas;  // 1 per pixel and layer, in [0,1]

    static ColoringOutput make(TextureScheme scheme, int h, int w, int layers, WeightForm form = WeightForm::Logits);

    int weight_count() const noexcept;
    std::size_t slot(int y, int x, int layer) const noexcept {
        return (static_cast<std::size_t>(y) * width + x) * layers + layer;
    }
    double &weight(int y, int x, int layer, int k) noexcept { return weights[slot(y, x, layer) * weight_count() + k]; }
    double &color(int y, int x, int layer, int c) noexcept { return colors[slot(y, x, layer) * 3 + c]; }
    double &alpha(int y, int x, int layer) noexcept { return alphas[slot(y, x, layer)]; }
    double alpha(int y, int x, int layer) const noexcept { return alphas[slot(y, x, layer)]; }

    /// Throws SchemeShapeMismatch or AlphaOutOfRange.
    void validate() const;
};

/// Layered mesh plus one straight-alpha RGBA texture (reference resolution) per layer.
struct TexturedScene {
    LayeredMeshSet meshes;
    std::vector<Image> textures;
    double depth_near = 1.0;
    double depth_far = 100.0;

    int layer_count() const noexcept { return meshes.layer_count(); }
    void validate() const;
};

/// Side view sampled at every reference texel of every layer, using that
/// texel's interpolated layer depth. Output size is the reference image size.
std::vector<WarpResult> unproject_side_onto_layers(const Image &side, const CameraRig &rig,
                                                   const LayeredMeshSet &meshes, int threads = 1);

/// Per-layer RGBA textures from the colouring output.
TexturedScene blend_textures(const ColoringOutput &coloring, const Image &reference,
                             const std::vector<WarpResult> &side_layers, const LayeredMeshSet &meshes);

struct OpacityReport {
    std::vector<double> mean_alpha;
    std::vector<bool> redundant;
    double threshold = 0.0;
};

/// Flags layers whose mean opacity is below `threshold`.
OpacityReport zero_out_check(const TexturedScene &scene, double threshold = 0.01);

} // namespace lm
