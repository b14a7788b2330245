// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "lm/aggregate.hpp"
#include "lm/core.hpp"

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

namespace lm {

/// Which diagonal splits each grid quad.
enum class QuadSplit {
    MainDiagonal, // top-left to bottom-right
    AntiDiagonal, // top-right to bottom-left
};

using Triangle = std::array<int, 3>;

struct LayerMesh {
    int layer = 0;
    std::vector<double> depths; // h*w, row-major
    std::vector<Vec3> vertices; // reference-frame positions
};

/// L meshes over one shared h x w vertex grid. Vertex (r, c) lies on the
/// reference ray through `rays[r*w + c]` at that layer's depth. Triangles are
/// counter-clockwise in reference pixel coordinates (x right, y down, positive
/// signed area).
struct LayeredMeshSet {
    CameraIntrinsics reference;
    int grid_height = 0;
    int grid_width = 0;
    QuadSplit split = QuadSplit::MainDiagonal;
    std::vector<Vec2> rays;
    std::vector<Triangle> triangles;
    std::vector<LayerMesh> layers;

    std::size_t vertex_count() const noexcept { return rays.size(); }
    int layer_count() const noexcept { return static_cast<int>(layers.size()); }

    /// Rebuilds vertex positions of one layer after its depths changed.
    void update_vertices(int layer);
};

/// Ray pixel of grid column/row `g` for a grid of `cells` spanning `pixels` image pixels.
double grid_to_pixel(double g, int cells, int pixels) noexcept;
double pixel_to_grid(double p, int cells, int pixels) noexcept;

std::vector<Triangle> grid_triangles(int h, int w, QuadSplit split);

LayeredMeshSet mesh_layers(const DepthLayerSet &depths, const CameraIntrinsics &reference,
                           QuadSplit split = QuadSplit::MainDiagonal);

/// Depth of `layer` under reference pixel `pixel`, bilinear over the vertex grid.
double layer_depth_at(const LayeredMeshSet &meshes, int layer, const Vec2 &pixel) noexcept;

struct SliceRow {
    int layer = 0;
    double x = 0.0;
    double depth = 0.0;
    double alpha = 0.0;
};

/// One grid row of every layer: (pixel x, vertex depth, opacity at that texel).
/// `textures` are the per-layer RGBA images. Throws RowOutOfRange.
std::vector<SliceRow> slice(const LayeredMeshSet &meshes, std::span<const Image> textures, int row);

void write_slice_csv(std::ostream &os, std::span<const SliceRow> rows);
/// Scatter plot: x on the horizontal axis, depth downward, dot opacity = alpha, colour = layer.
void write_slice_svg(std::ostream &os, std::span<const SliceRow> rows, int image_width);

} // namespace lm
