// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#include "lm/meshing.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

namespace lm {

double grid_to_pixel(double g, int cells, int pixels) noexcept {
    return (g + 0.5) * static_cast<double>(pixels) / cells - 0.5;
}

double pixel_to_grid(double p, int cells, int pixels) noexcept {
    return (p + 0.5) * static_cast<double>(cells) / pixels - 0.5;
}

std::vector<Triangle> grid_triangles(int h, int w, QuadSplit split) {
    std::vector<Triangle> tris;
    if (h < 2 || w < 2) {
        return tris;
    }
    tris.reserve(static_cast<std::size_t>(2) * (h - 1) * (w - 1));
    for (int r = 0; r + 1 < h; ++r) {
        for (int c = 0; c + 1 < w; ++c) {
            const int tl = r * w + c;
            const int tr = tl + 1;
            const int bl = tl + w;
            const int br = bl + 1;
            if (split == QuadSplit::MainDiagonal) {
                tris.push_back({tl, tr, br});
                tris.push_back({tl, br, bl});
            } else {
                tris.push_back({tl, tr, bl});
                tris.push_back({tr, br, bl});
            }
        }
    }
    return tris;
}

void LayeredMeshSet::update_vertices(int layer) {
    auto &mesh = layers[static_cast<std::size_t>(layer)];
    mesh.vertices.resize(rays.size());
    for (std::size_t i = 0; i < rays.size(); ++i) {
        mesh.vertices[i] = backproject(rays[i], mesh.depths[i], reference);
    }
}

LayeredMeshSet mesh_layers(const DepthLayerSet &depths, const CameraIntrinsics &reference, QuadSplit split) {
    reference.validate();
    if (depths.layers < 1 || depths.height < 1 || depths.width < 1) {
        throw Error(ErrorCode::InvalidScene, "layer set is empty");
    }
    LayeredMeshSet set;
    set.reference = reference;
    set.grid_height = depths.height;
    set.grid_width = depths.width;
    set.split = split;
    set.rays.resize(static_cast<std::size_t>(depths.height) * depths.width);
    for (int r = 0; r < depths.height; ++r) {
        const double v = grid_to_pixel(r, depths.height, reference.height);
        for (int c = 0; c < depths.width; ++c) {
            set.rays[static_cast<std::size_t>(r) * depths.width + c] =
                Vec2(grid_to_pixel(c, depths.width, reference.width), v);
        }
    }
    set.triangles = grid_triangles(depths.height, depths.width, split);
    set.layers.resize(static_cast<std::size_t>(depths.layers));
    for (int j = 0; j < depths.layers; ++j) {
        auto &mesh = set.layers[static_cast<std::size_t>(j)];
        mesh.layer = j;
        const auto src = depths.layer(j);
        mesh.depths.assign(src.begin(), src.end());
        set.update_vertices(j);
    }
    return set;
}

double layer_depth_at(const LayeredMeshSet &meshes, int layer, const Vec2 &pixel) noexcept {
    const int h = meshes.grid_height;
    const int w = meshes.grid_width;
    const double gx = std::clamp(pixel_to_grid(pixel.x(), w, meshes.reference.width), 0.0, w - 1.0);
    const double gy = std::clamp(pixel_to_grid(pixel.y(), h, meshes.reference.height), 0.0, h - 1.0);
    const auto f = bilinear_footprint(Vec2(gx, gy), w, h);
    const auto &d = meshes.layers[static_cast<std::size_t>(layer)].depths;
    const auto at = [&](int r, int c) { return d[static_cast<std::size_t>(r) * w + c]; };
    return (1.0 - f.ty) * ((1.0 - f.tx) * at(f.y0, f.x0) + f.tx * at(f.y0, f.x1)) +
           f.ty * ((1.0 - f.tx) * at(f.y1, f.x0) + f.tx * at(f.y1, f.x1));
}

std::vector<SliceRow> slice(const LayeredMeshSet &meshes, std::span<const Image> textures, int row) {
    if (row < 0 || row >= meshes.grid_height) {
        throw Error(ErrorCode::RowOutOfRange,
                    "row " + std::to_string(row) + " outside 0.." + std::to_string(meshes.grid_height - 1));
    }
    if (textures.size() != meshes.layers.size()) {
        throw Error(ErrorCode::ShapeMismatch, "one RGBA texture per layer is required");
    }
    std::vector<SliceRow> rows;
    rows.reserve(meshes.layers.size() * static_cast<std::size_t>(meshes.grid_width));
    double rgba[4];
    for (const auto &mesh : meshes.layers) {
        const Image &tex = textures[static_cast<std::size_t>(mesh.layer)];
        for (int c = 0; c < meshes.grid_width; ++c) {
            const std::size_t v = static_cast<std::size_t>(row) * meshes.grid_width + c;
            const Vec2 &ray = meshes.rays[v];
            double alpha = 0.0;
            if (tex.channels() == 4 && bilinear_sample(tex, ray, rgba)) {
                alpha = rgba[3];
            }
            rows.push_back({mesh.layer, ray.x(), mesh.depths[v], alpha});
        }
    }
    return rows;
}

void write_slice_csv(std::ostream &os, std::span<const SliceRow> rows) {
    os << "layer,x,depth,alpha\n";
    for (const auto &r : rows) {
        os << r.layer << ',' << r.x << ',' << r.depth << ',' << r.alpha << '\n';
    }
}

void write_slice_svg(std::ostream &os, std::span<const SliceRow> rows, int image_width) {
    static constexpr const char *palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                              "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    constexpr double plot_w = 800.0;
    constexpr double plot_h = 400.0;
    constexpr double pad = 40.0;
    double dmin = 1e300;
    double dmax = -1e300;
    for (const auto &r : rows) {
        dmin = std::min(dmin, r.depth);
        dmax = std::max(dmax, r.depth);
    }
    if (rows.empty() || dmax <= dmin) {
        dmax = dmin + 1.0;
    }
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << plot_w + 2 * pad << "\" height=\""
       << plot_h + 2 * pad << "\">\n";
    os << "<rect x=\"" << pad << "\" y=\"" << pad << "\" width=\"" << plot_w << "\" height=\"" << plot_h
       << "\" fill=\"none\" stroke=\"#444\"/>\n";
    os << "<text x=\"" << pad << "\" y=\"" << pad - 10 << "\" font-size=\"12\">depth " << dmin << " .. " << dmax
       << " (down), pixel x 0 .. " << image_width - 1 << "</text>\n";
    for (const auto &r : rows) {
        const double px = pad + plot_w * r.x / std::max(1, image_width - 1);
        const double py = pad + plot_h * (r.depth - dmin) / (dmax - dmin);
        os << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"2\" fill=\"" << palette[r.layer % 8]
           << "\" fill-opacity=\"" << std::clamp(r.alpha, 0.05, 1.0) << "\"/>\n";
    }
    os << "</svg>\n";
}

} // namespace lm
