// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#include "lm/coalesce.hpp"

#include "lm/meshing.hpp"
#include "lm/parallel.hpp"
#include "lm/random.hpp"
#include "lm/render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace lm {

void MultiPlaneImage::validate() const {
    reference.validate();
    if (planes.size() == 0 || rgba.size() != planes.size()) {
        throw Error(ErrorCode::InvalidScene, "MPI needs one RGBA image per plane");
    }
    for (const auto &img : rgba) {
        if (img.channels() != 4 || img.height() != reference.height || img.width() != reference.width) {
            throw Error(ErrorCode::InvalidScene, "MPI planes must be RGBA at the reference resolution");
        }
    }
}

void CoalesceConfig::validate() const {
    if (!(sigma > 0.0) || samples < 1 || !(eps_alpha > 0.0 && eps_alpha < 1.0) || layers < 1) {
        throw Error(ErrorCode::InvalidConfig, "coalesce needs sigma > 0, samples >= 1, 0 < eps_alpha < 1");
    }
}

DepthLayerSet merge_depths(const MultiPlaneImage &mpi, int layers) {
    mpi.validate();
    const int p = static_cast<int>(mpi.planes.size());
    BetaVolume beta = BetaVolume::gc(mpi.height(), mpi.width(), p);
    for (int y = 0; y < mpi.height(); ++y) {
        for (int x = 0; x < mpi.width(); ++x) {
            auto b = beta.pixel(y, x);
            for (int k = 0; k < p; ++k) {
                b[k] = std::clamp(mpi.rgba[static_cast<std::size_t>(k)].at(y, x, 3), 0.0, 1.0);
            }
        }
    }
    return aggregate_gc(beta, mpi.planes, layers);
}

MergedTexel merge_ray_statistics(std::span<const double> transmittance, std::span<const double> colors,
                                 std::span<const double> weights, double eps_alpha) {
    double lambda = 0.0;
    double sq = 0.0;
    double wsum = 0.0;
    std::array<double, 3> c{};
    for (std::size_t r = 0; r < transmittance.size(); ++r) {
        const double l = std::log(std::clamp(transmittance[r], eps_alpha, 1.0));
        const double w = weights[r];
        wsum += w;
        lambda += w * l;
        sq += w * l * l;
        for (int k = 0; k < 3; ++k) {
            c[k] += w * colors[r * 3 + k] * l;
        }
    }
    MergedTexel out;
    if (!(std::abs(lambda) > 1e-15 * wsum)) {
        out.degenerate = true;
        return out;
    }
    out.transmittance = std::clamp(std::exp(sq / lambda), eps_alpha, 1.0);
    for (int k = 0; k < 3; ++k) {
        out.color[k] = c[k] / lambda;
    }
    return out;
}

CoalesceResult merge_textures(const MultiPlaneImage &mpi, const DepthLayerSet &layers, const CoalesceConfig &cfg) {
    mpi.validate();
    cfg.validate();
    const int h = mpi.height();
    const int w = mpi.width();
    const int p = static_cast<int>(mpi.planes.size());
    if (layers.height != h || layers.width != w || layers.layers < 1 || p % layers.layers != 0) {
        throw Error(ErrorCode::ShapeMismatch, "merged layers do not match the MPI");
    }
    const int group = p / layers.layers;
    const CameraIntrinsics &k = mpi.reference;
    const double norm = 1.0 / (2.0 * std::numbers::pi * cfg.sigma * cfg.sigma);
    const int n = cfg.samples;

    CoalesceResult result;
    result.scene.meshes = mesh_layers(layers, k);
    result.scene.depth_near = mpi.planes.nearest();
    result.scene.depth_far = mpi.planes.farthest();
    result.scene.textures.assign(static_cast<std::size_t>(layers.layers), Image(h, w, 4));
    std::vector<std::uint8_t> degenerate(static_cast<std::size_t>(layers.layers) * h * w, 0);

    const std::size_t rows = static_cast<std::size_t>(layers.layers) * h;
    parallel_for(rows, cfg.threads, [&](std::size_t row) {
        const int j = static_cast<int>(row / h);
        const int y = static_cast<int>(row % h);
        std::vector<double> trans(n), cols(3 * static_cast<std::size_t>(n)), wts(n);
        double rgba[4];
        Image &tex = result.scene.textures[static_cast<std::size_t>(j)];
        for (int x = 0; x < w; ++x) {
            const std::size_t texel = (static_cast<std::size_t>(j) * h + y) * w + x;
            std::mt19937_64 rng(cfg.seed ^ texel);
            const Vec2 px(x, y);
            const Vec3 t = backproject(px, layers.at(j, y, x), k);
            const bool centre = cfg.through_camera_center || std::abs(t.z() - 1.0) < 1e-12;
            for (int r = 0; r < n; ++r) {
                const auto [g0, g1] = normal_pair(rng);
                const double dx = cfg.sigma * g0;
                const double dy = cfg.sigma * g1;
                const Vec2 q = px + Vec2(dx, dy);
                wts[r] = norm * std::exp(-(dx * dx + dy * dy) / (2.0 * cfg.sigma * cfg.sigma));
                const Vec3 origin = pixel_ray(q, k); // q on the plane z = 1
                OverAccumulator acc;
                for (int m = j * group; m < (j + 1) * group; ++m) {
                    const double d = mpi.planes[static_cast<std::size_t>(m)];
                    // Exact intersection with the plane z = d.
                    const Vec3 hit =
                        centre ? Vec3(origin * d) : Vec3(origin + (d - 1.0) / (t.z() - 1.0) * (t - origin));
                    if (!(hit.z() > 0.0)) {
                        continue;
                    }
                    // Jittered rays near the border leave the frame; planes extend by edge replication
                    // so border texels do not lose opacity.
                    Vec2 at = project(hit, k);
                    at.x() = std::clamp(at.x(), 0.0, static_cast<double>(w - 1));
                    at.y() = std::clamp(at.y(), 0.0, static_cast<double>(h - 1));
                    bilinear_sample(mpi.rgba[static_cast<std::size_t>(m)], at, rgba);
                    acc.add({rgba[0], rgba[1], rgba[2]}, std::clamp(rgba[3], 0.0, 1.0));
                }
                trans[r] = acc.transmittance;
                for (int c = 0; c < 3; ++c) {
                    cols[3 * static_cast<std::size_t>(r) + c] = acc.color[c];
                }
            }
            const MergedTexel m = merge_ray_statistics(trans, cols, wts, cfg.eps_alpha);
            if (m.degenerate) {
                degenerate[texel] = 1;
                continue; // colour 0, alpha 0
            }
            const double alpha = 1.0 - m.transmittance;
            for (int c = 0; c < 3; ++c) {
                tex.at(y, x, c) = alpha > 0.0 ? std::clamp(m.color[c] / alpha, 0.0, 1.0) : 0.0;
            }
            tex.at(y, x, 3) = alpha;
        }
    });
    result.degenerate_texels = static_cast<std::size_t>(std::count(degenerate.begin(), degenerate.end(), 1));
    return result;
}

CoalesceResult coalesce(const MultiPlaneImage &mpi, const CoalesceConfig &cfg) {
    return merge_textures(mpi, merge_depths(mpi, cfg.layers), cfg);
}

TexturedScene mpi_to_scene(const MultiPlaneImage &mpi) {
    mpi.validate();
    const int p = static_cast<int>(mpi.planes.size());
    DepthLayerSet depths(p, mpi.height(), mpi.width(), DepthScheme::GC);
    for (int k = 0; k < p; ++k) {
        std::fill_n(depths.depths.begin() + static_cast<std::ptrdiff_t>(depths.index(k, 0, 0)),
                    static_cast<std::size_t>(mpi.height()) * mpi.width(), mpi.planes[static_cast<std::size_t>(k)]);
    }
    TexturedScene scene;
    scene.meshes = mesh_layers(depths, mpi.reference);
    scene.textures = mpi.rgba;
    scene.depth_near = mpi.planes.nearest();
    scene.depth_far = mpi.planes.farthest();
    return scene;
}

} // namespace lm
