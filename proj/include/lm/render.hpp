// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "lm/core.hpp"
#include "lm/texture.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace lm {

struct RenderOptions {
    int tile_size = 32;
    int threads = 1;
    /// Triangles with any vertex at z <= near_z in the target camera are dropped.
    double near_z = 1e-6;
};

/// Front-to-back "over" of (colour, alpha) fragments.
struct ColorAlpha {
    std::array<double, 3> color{};
    double alpha = 0.0;
};

/// color = sum_k c_k a_k prod_{i<k}(1 - a_i); alpha = 1 - prod_k (1 - a_k).
/// Throws AlphaOutOfRange.
ColorAlpha compose_over(std::span<const ColorAlpha> front_to_back);

/// Gradients of <g_color, color> + g_alpha * alpha w.r.t. each fragment's colour and alpha.
std::vector<ColorAlpha> compose_over_backward(std::span<const ColorAlpha> front_to_back,
                                              const std::array<double, 3> &g_color, double g_alpha);

/// Running front-to-back accumulator; compositing a prefix and then the rest
/// equals compositing everything at once.
struct OverAccumulator {
    std::array<double, 3> color{};
    double transmittance = 1.0;

    void add(const std::array<double, 3> &c, double a) noexcept {
        const double w = transmittance * a;
        color[0] += w * c[0];
        color[1] += w * c[1];
        color[2] += w * c[2];
        transmittance *= 1.0 - a;
    }
    double alpha() const noexcept { return 1.0 - transmittance; }
};

/// Nearest hit of one triangle mesh at one pixel.
struct Coverage {
    int triangle = -1;
    double depth = 0.0;               // z in the target camera
    std::array<double, 3> bary{};     // perspective-correct barycentrics

    bool hit() const noexcept { return triangle >= 0; }
};

/// Rasterises triangles given in target-camera coordinates. Pixel (x, y)
/// samples (x, y) exactly; ties in depth go to the lower triangle index, so
/// the result is independent of tile size and thread count.
std::vector<Coverage> rasterize_triangles(std::span<const Vec3> camera_vertices, std::span<const Triangle> triangles,
                                          const CameraIntrinsics &k, int height, int width,
                                          const RenderOptions &opts = {});

struct Fragment {
    Coverage coverage;
    Vec2 uv = Vec2::Zero();            // texture coordinate (reference pixels)
    std::array<double, 4> rgba{};      // straight alpha
    BilinearFootprint texel;
};

/// Per pixel and layer, the nearest fragment of that layer.
struct FragmentBuffer {
    int layers = 0;
    int height = 0;
    int width = 0;
    std::vector<Fragment> fragments; // (layer, y, x)

    std::size_t index(int layer, int y, int x) const noexcept {
        return (static_cast<std::size_t>(layer) * height + y) * width + x;
    }
    const Fragment &at(int layer, int y, int x) const noexcept { return fragments[index(layer, y, x)]; }
};

struct RenderOutput {
    Image color; // H x W x 3
    Image alpha; // H x W x 1
};

/// Throws DegenerateCamera for invalid intrinsics; `height`/`width` default to the intrinsics' size.
FragmentBuffer rasterize(const TexturedScene &scene, const Camera &camera, int height, int width,
                         const RenderOptions &opts = {});

/// Layer-index compose-over of a fragment buffer.
RenderOutput composite(const FragmentBuffer &fragments, int threads = 1);
/// Per-pixel depth-sorted compositing; for comparison only.
RenderOutput composite_depth_sorted(const FragmentBuffer &fragments);

/// Same result as composite(rasterize(...)) without keeping the fragment buffer.
RenderOutput render(const TexturedScene &scene, const Camera &camera, int height, int width,
                    const RenderOptions &opts = {});

struct SceneGradients {
    std::vector<double> depths;  // layer-major, h*w per layer
    std::vector<Image> textures; // RGBA per layer
};

/// Analytic gradients of a loss through compose-over, bilinear texture
/// lookup, barycentric interpolation and perspective projection, with the
/// coverage of `fragments` held fixed. `upstream_alpha` is optional.
SceneGradients render_backward(const TexturedScene &scene, const Camera &camera, const FragmentBuffer &fragments,
                               const Image &upstream_color, const Image *upstream_alpha = nullptr,
                               const RenderOptions &opts = {});

/// True when two fragment buffers use the same triangles and texel cells everywhere.
bool same_coverage(const FragmentBuffer &a, const FragmentBuffer &b) noexcept;

} // namespace lm
