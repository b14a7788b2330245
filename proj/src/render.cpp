// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#include "lm/render.hpp"

#include "lm/parallel.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace lm {
namespace {

constexpr double kBaryEps = 1e-9;

inline double cross2(double ax, double ay, double bx, double by) noexcept { return ax * by - ay * bx; }

struct TriangleSetup {
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1; // inclusive pixel bbox
    double inv_area = 0.0;
};

void require_camera(const Camera &camera) {
    if (!camera.intrinsics.is_valid()) {
        throw Error(ErrorCode::DegenerateCamera, "target camera intrinsics are invalid");
    }
}

std::array<double, 4> sample_rgba(const Image &tex, const BilinearFootprint &f) noexcept {
    std::array<double, 4> out{};
    if (!f.valid) {
        return out;
    }
    const double w00 = (1.0 - f.tx) * (1.0 - f.ty);
    const double w10 = f.tx * (1.0 - f.ty);
    const double w01 = (1.0 - f.tx) * f.ty;
    const double w11 = f.tx * f.ty;
    for (int c = 0; c < 4; ++c) {
        out[c] = w00 * tex.at(f.y0, f.x0, c) + w10 * tex.at(f.y0, f.x1, c) + w01 * tex.at(f.y1, f.x0, c) +
                 w11 * tex.at(f.y1, f.x1, c);
    }
    return out;
}

} // namespace

ColorAlpha compose_over(std::span<const ColorAlpha> front_to_back) {
    OverAccumulator acc;
    for (const auto &f : front_to_back) {
        if (!(f.alpha >= 0.0 && f.alpha <= 1.0)) {
            throw Error(ErrorCode::AlphaOutOfRange, "alpha " + std::to_string(f.alpha) + " outside [0,1]");
        }
        acc.add(f.color, f.alpha);
    }
    return {acc.color, acc.alpha()};
}

std::vector<ColorAlpha> compose_over_backward(std::span<const ColorAlpha> front_to_back,
                                              const std::array<double, 3> &g_color, double g_alpha) {
    const std::size_t n = front_to_back.size();
    // suffix[k]: colour and transmittance of fragments k.. composited on their own.
    std::vector<std::array<double, 3>> suffix(n + 1, {0.0, 0.0, 0.0});
    std::vector<double> suffix_t(n + 1, 1.0);
    for (std::size_t k = n; k-- > 0;) {
        const auto &f = front_to_back[k];
        for (int c = 0; c < 3; ++c) {
            suffix[k][c] = f.alpha * f.color[c] + (1.0 - f.alpha) * suffix[k + 1][c];
        }
        suffix_t[k] = (1.0 - f.alpha) * suffix_t[k + 1];
    }
    std::vector<ColorAlpha> grads(n);
    double trans = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto &f = front_to_back[k];
        double ga = g_alpha * trans * suffix_t[k + 1];
        for (int c = 0; c < 3; ++c) {
            grads[k].color[c] = g_color[c] * trans * f.alpha;
            ga += g_color[c] * trans * (f.color[c] - suffix[k + 1][c]);
        }
        grads[k].alpha = ga;
        trans *= 1.0 - f.alpha;
    }
    return grads;
}

std::vector<Coverage> rasterize_triangles(std::span<const Vec3> camera_vertices, std::span<const Triangle> triangles,
                                          const CameraIntrinsics &k, int height, int width,
                                          const RenderOptions &opts) {
    std::vector<Coverage> out(static_cast<std::size_t>(height) * width);
    if (height <= 0 || width <= 0 || triangles.empty()) {
        return out;
    }
    const std::size_t n = camera_vertices.size();
    std::vector<Vec2> screen(n);
    std::vector<double> inv_z(n);
    std::vector<std::uint8_t> front(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 &p = camera_vertices[i];
        front[i] = p.z() > opts.near_z;
        if (front[i]) {
            inv_z[i] = 1.0 / p.z();
            screen[i] = Vec2(k.fx * p.x() * inv_z[i] + k.cx, k.fy * p.y() * inv_z[i] + k.cy);
        }
    }

    const int ts = std::max(1, opts.tile_size);
    const int tiles_x = (width + ts - 1) / ts;
    const int tiles_y = (height + ts - 1) / ts;
    const std::size_t tile_count = static_cast<std::size_t>(tiles_x) * tiles_y;

    std::vector<TriangleSetup> setup(triangles.size());
    std::vector<std::uint32_t> tile_offsets(tile_count + 1, 0);
    for (std::size_t t = 0; t < triangles.size(); ++t) {
        const auto &tri = triangles[t];
        if (!front[tri[0]] || !front[tri[1]] || !front[tri[2]]) {
            continue;
        }
        const Vec2 &a = screen[tri[0]];
        const Vec2 &b = screen[tri[1]];
        const Vec2 &c = screen[tri[2]];
        const double area = cross2(b.x() - a.x(), b.y() - a.y(), c.x() - a.x(), c.y() - a.y());
        if (!(std::abs(area) > 1e-12) || !std::isfinite(area)) {
            continue;
        }
        auto &s = setup[t];
        s.inv_area = 1.0 / area;
        const double minx = std::min({a.x(), b.x(), c.x()});
        const double maxx = std::max({a.x(), b.x(), c.x()});
        const double miny = std::min({a.y(), b.y(), c.y()});
        const double maxy = std::max({a.y(), b.y(), c.y()});
        if (maxx < 0.0 || maxy < 0.0 || minx > width - 1 || miny > height - 1) {
            s.inv_area = 0.0;
            continue;
        }
        s.x0 = std::max(0, static_cast<int>(std::ceil(minx - 1e-9)));
        s.x1 = std::min(width - 1, static_cast<int>(std::floor(maxx + 1e-9)));
        s.y0 = std::max(0, static_cast<int>(std::ceil(miny - 1e-9)));
        s.y1 = std::min(height - 1, static_cast<int>(std::floor(maxy + 1e-9)));
        if (s.x0 > s.x1 || s.y0 > s.y1) {
            s.inv_area = 0.0;
            continue;
        }
        for (int ty = s.y0 / ts; ty <= s.y1 / ts; ++ty) {
            for (int tx = s.x0 / ts; tx <= s.x1 / ts; ++tx) {
                ++tile_offsets[static_cast<std::size_t>(ty) * tiles_x + tx + 1];
            }
        }
    }
    std::partial_sum(tile_offsets.begin(), tile_offsets.end(), tile_offsets.begin());
    std::vector<std::uint32_t> bins(tile_offsets.back());
    {
        std::vector<std::uint32_t> fill(tile_offsets.begin(), tile_offsets.end() - 1);
        for (std::size_t t = 0; t < triangles.size(); ++t) {
            const auto &s = setup[t];
            if (s.inv_area == 0.0) {
                continue;
            }
            for (int ty = s.y0 / ts; ty <= s.y1 / ts; ++ty) {
                for (int tx = s.x0 / ts; tx <= s.x1 / ts; ++tx) {
                    bins[fill[static_cast<std::size_t>(ty) * tiles_x + tx]++] = static_cast<std::uint32_t>(t);
                }
            }
        }
    }

    parallel_for(tile_count, opts.threads, [&](std::size_t tile) {
        const int tx = static_cast<int>(tile % tiles_x);
        const int ty = static_cast<int>(tile / tiles_x);
        const int px0 = tx * ts;
        const int py0 = ty * ts;
        const int px1 = std::min(width - 1, px0 + ts - 1);
        const int py1 = std::min(height - 1, py0 + ts - 1);
        for (std::uint32_t b = tile_offsets[tile]; b < tile_offsets[tile + 1]; ++b) {
            const int t = static_cast<int>(bins[b]);
            const auto &s = setup[static_cast<std::size_t>(t)];
            const auto &tri = triangles[static_cast<std::size_t>(t)];
            const Vec2 &a = screen[tri[0]];
            const Vec2 &bb = screen[tri[1]];
            const Vec2 &c = screen[tri[2]];
            const int x0 = std::max(s.x0, px0);
            const int x1 = std::min(s.x1, px1);
            const int y0 = std::max(s.y0, py0);
            const int y1 = std::min(s.y1, py1);
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const double l0 = cross2(c.x() - bb.x(), c.y() - bb.y(), x - bb.x(), y - bb.y()) * s.inv_area;
                    const double l1 = cross2(a.x() - c.x(), a.y() - c.y(), x - c.x(), y - c.y()) * s.inv_area;
                    const double l2 = cross2(bb.x() - a.x(), bb.y() - a.y(), x - a.x(), y - a.y()) * s.inv_area;
                    if (l0 < -kBaryEps || l1 < -kBaryEps || l2 < -kBaryEps) {
                        continue;
                    }
                    const double q0 = l0 * inv_z[tri[0]];
                    const double q1 = l1 * inv_z[tri[1]];
                    const double q2 = l2 * inv_z[tri[2]];
                    const double sum = q0 + q1 + q2;
                    if (!(sum > 0.0)) {
                        continue;
                    }
                    const double z = 1.0 / sum;
                    Coverage &cov = out[static_cast<std::size_t>(y) * width + x];
                    if (!cov.hit() || z < cov.depth || (z == cov.depth && t < cov.triangle)) {
                        cov.triangle = t;
                        cov.depth = z;
                        cov.bary = {q0 * z, q1 * z, q2 * z};
                    }
                }
            }
        }
    });
    return out;
}

FragmentBuffer rasterize(const TexturedScene &scene, const Camera &camera, int height, int width,
                         const RenderOptions &opts) {
    require_camera(camera);
    scene.validate();
    FragmentBuffer buf;
    buf.layers = scene.layer_count();
    buf.height = height;
    buf.width = width;
    buf.fragments.resize(static_cast<std::size_t>(buf.layers) * height * width);
    const auto &meshes = scene.meshes;
    std::vector<Vec3> cam(meshes.vertex_count());
    for (int j = 0; j < buf.layers; ++j) {
        const auto &verts = meshes.layers[static_cast<std::size_t>(j)].vertices;
        for (std::size_t i = 0; i < cam.size(); ++i) {
            cam[i] = camera.pose.apply(verts[i]);
        }
        const auto cov = rasterize_triangles(cam, meshes.triangles, camera.intrinsics, height, width, opts);
        const Image &tex = scene.textures[static_cast<std::size_t>(j)];
        Fragment *dst = buf.fragments.data() + buf.index(j, 0, 0);
        parallel_for(static_cast<std::size_t>(height), opts.threads, [&](std::size_t y) {
            for (int x = 0; x < width; ++x) {
                const std::size_t p = y * static_cast<std::size_t>(width) + x;
                Fragment &f = dst[p];
                f.coverage = cov[p];
                if (!f.coverage.hit()) {
                    continue;
                }
                const auto &tri = meshes.triangles[static_cast<std::size_t>(f.coverage.triangle)];
                const auto &b = f.coverage.bary;
                f.uv = b[0] * meshes.rays[tri[0]] + b[1] * meshes.rays[tri[1]] + b[2] * meshes.rays[tri[2]];
                f.texel = bilinear_footprint(f.uv, tex.width(), tex.height());
                f.rgba = sample_rgba(tex, f.texel);
            }
        });
    }
    return buf;
}

RenderOutput composite(const FragmentBuffer &fragments, int threads) {
    RenderOutput out{Image(fragments.height, fragments.width, 3), Image(fragments.height, fragments.width, 1)};
    parallel_for(static_cast<std::size_t>(fragments.height), threads, [&](std::size_t yy) {
        const int y = static_cast<int>(yy);
        for (int x = 0; x < fragments.width; ++x) {
            OverAccumulator acc;
            for (int j = 0; j < fragments.layers; ++j) {
                const Fragment &f = fragments.at(j, y, x);
                if (f.coverage.hit()) {
                    acc.add({f.rgba[0], f.rgba[1], f.rgba[2]}, f.rgba[3]);
                }
            }
            for (int c = 0; c < 3; ++c) {
                out.color.at(y, x, c) = acc.color[c];
            }
            out.alpha.at(y, x) = acc.alpha();
        }
    });
    return out;
}

RenderOutput composite_depth_sorted(const FragmentBuffer &fragments) {
    RenderOutput out{Image(fragments.height, fragments.width, 3), Image(fragments.height, fragments.width, 1)};
    std::vector<const Fragment *> hits;
    for (int y = 0; y < fragments.height; ++y) {
        for (int x = 0; x < fragments.width; ++x) {
            hits.clear();
            for (int j = 0; j < fragments.layers; ++j) {
                if (fragments.at(j, y, x).coverage.hit()) {
                    hits.push_back(&fragments.at(j, y, x));
                }
            }
            std::stable_sort(hits.begin(), hits.end(), [](const Fragment *a, const Fragment *b) {
                return a->coverage.depth < b->coverage.depth;
            });
            OverAccumulator acc;
            for (const Fragment *f : hits) {
                acc.add({f->rgba[0], f->rgba[1], f->rgba[2]}, f->rgba[3]);
            }
            for (int c = 0; c < 3; ++c) {
                out.color.at(y, x, c) = acc.color[c];
            }
            out.alpha.at(y, x) = acc.alpha();
        }
    }
    return out;
}

RenderOutput render(const TexturedScene &scene, const Camera &camera, int height, int width,
                    const RenderOptions &opts) {
    require_camera(camera);
    scene.validate();
    const auto &meshes = scene.meshes;
    const std::size_t pixels = static_cast<std::size_t>(height) * width;
    std::vector<OverAccumulator> acc(pixels);
    std::vector<Vec3> cam(meshes.vertex_count());
    for (int j = 0; j < scene.layer_count(); ++j) {
        const auto &verts = meshes.layers[static_cast<std::size_t>(j)].vertices;
        for (std::size_t i = 0; i < cam.size(); ++i) {
            cam[i] = camera.pose.apply(verts[i]);
        }
        const auto cov = rasterize_triangles(cam, meshes.triangles, camera.intrinsics, height, width, opts);
        const Image &tex = scene.textures[static_cast<std::size_t>(j)];
        parallel_for(static_cast<std::size_t>(height), opts.threads, [&](std::size_t y) {
            for (int x = 0; x < width; ++x) {
                const std::size_t p = y * static_cast<std::size_t>(width) + x;
                if (!cov[p].hit()) {
                    continue;
                }
                const auto &tri = meshes.triangles[static_cast<std::size_t>(cov[p].triangle)];
                const auto &b = cov[p].bary;
                const Vec2 uv = b[0] * meshes.rays[tri[0]] + b[1] * meshes.rays[tri[1]] + b[2] * meshes.rays[tri[2]];
                const auto rgba = sample_rgba(tex, bilinear_footprint(uv, tex.width(), tex.height()));
                acc[p].add({rgba[0], rgba[1], rgba[2]}, rgba[3]);
            }
        });
    }
    RenderOutput out{Image(height, width, 3), Image(height, width, 1)};
    for (std::size_t p = 0; p < pixels; ++p) {
        for (int c = 0; c < 3; ++c) {
            out.color.data()[p * 3 + c] = acc[p].color[c];
        }
        out.alpha.data()[p] = acc[p].alpha();
    }
    return out;
}

bool same_coverage(const FragmentBuffer &a, const FragmentBuffer &b) noexcept {
    if (a.fragments.size() != b.fragments.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.fragments.size(); ++i) {
        const auto &fa = a.fragments[i];
        const auto &fb = b.fragments[i];
        if (fa.coverage.triangle != fb.coverage.triangle) {
            return false;
        }
        if (fa.coverage.hit() && (fa.texel.valid != fb.texel.valid || fa.texel.x0 != fb.texel.x0 ||
                                  fa.texel.y0 != fb.texel.y0)) {
            return false;
        }
    }
    return true;
}

namespace {

// Gradient contributions of one fragment, scattered later in pixel order.
struct FragmentGrad {
    std::array<double, 4> rgba{};
    std::array<double, 3> depth{};
    bool active = false;
};

} // namespace

SceneGradients render_backward(const TexturedScene &scene, const Camera &camera, const FragmentBuffer &fragments,
                               const Image &upstream_color, const Image *upstream_alpha,
                               const RenderOptions &opts) {
    require_camera(camera);
    const int h = fragments.height;
    const int w = fragments.width;
    const int layers = fragments.layers;
    if (upstream_color.height() != h || upstream_color.width() != w || upstream_color.channels() != 3 ||
        layers != scene.layer_count()) {
        throw Error(ErrorCode::ShapeMismatch, "upstream gradient does not match the fragment buffer");
    }
    if (upstream_alpha && (upstream_alpha->height() != h || upstream_alpha->width() != w)) {
        throw Error(ErrorCode::ShapeMismatch, "upstream alpha gradient does not match the fragment buffer");
    }
    const auto &meshes = scene.meshes;
    const Mat3 &rot = camera.pose.rotation();
    const Mat3 kinv = camera.intrinsics.inverse_matrix();

    // Camera-frame vertices and d(vertex)/d(depth) directions, per layer.
    std::vector<Vec3> ray_dirs(meshes.vertex_count());
    for (std::size_t i = 0; i < ray_dirs.size(); ++i) {
        ray_dirs[i] = rot * pixel_ray(meshes.rays[i], meshes.reference);
    }

    std::vector<FragmentGrad> grads(fragments.fragments.size());
    parallel_for(static_cast<std::size_t>(h), opts.threads, [&](std::size_t yy) {
        const int y = static_cast<int>(yy);
        std::vector<int> hit;
        std::vector<std::array<double, 3>> suffix_color;
        std::vector<double> suffix_trans;
        for (int x = 0; x < w; ++x) {
            hit.clear();
            for (int j = 0; j < layers; ++j) {
                if (fragments.at(j, y, x).coverage.hit()) {
                    hit.push_back(j);
                }
            }
            if (hit.empty()) {
                continue;
            }
            const std::size_t m = hit.size();
            suffix_color.assign(m + 1, {0.0, 0.0, 0.0});
            suffix_trans.assign(m + 1, 1.0);
            for (std::size_t k = m; k-- > 0;) {
                const auto &rgba = fragments.at(hit[k], y, x).rgba;
                for (int c = 0; c < 3; ++c) {
                    suffix_color[k][c] = rgba[3] * rgba[c] + (1.0 - rgba[3]) * suffix_color[k + 1][c];
                }
                suffix_trans[k] = (1.0 - rgba[3]) * suffix_trans[k + 1];
            }
            const double g_alpha_out = upstream_alpha ? upstream_alpha->at(y, x) : 0.0;
            double trans = 1.0;
            for (std::size_t k = 0; k < m; ++k) {
                const int j = hit[k];
                const Fragment &f = fragments.at(j, y, x);
                FragmentGrad &g = grads[fragments.index(j, y, x)];
                g.active = true;
                double ga = g_alpha_out * trans * suffix_trans[k + 1];
                for (int c = 0; c < 3; ++c) {
                    const double up = upstream_color.at(y, x, c);
                    g.rgba[c] = up * trans * f.rgba[3];
                    ga += up * trans * (f.rgba[c] - suffix_color[k + 1][c]);
                }
                g.rgba[3] = ga;
                trans *= 1.0 - f.rgba[3];

                // Through the bilinear lookup into the texture coordinate.
                const Image &tex = scene.textures[static_cast<std::size_t>(j)];
                const auto &t = f.texel;
                if (!t.valid) {
                    continue;
                }
                double gu = 0.0;
                double gv = 0.0;
                for (int c = 0; c < 4; ++c) {
                    const double p00 = tex.at(t.y0, t.x0, c);
                    const double p10 = tex.at(t.y0, t.x1, c);
                    const double p01 = tex.at(t.y1, t.x0, c);
                    const double p11 = tex.at(t.y1, t.x1, c);
                    if (t.x1 != t.x0) gu += g.rgba[c] * ((1.0 - t.ty) * (p10 - p00) + t.ty * (p11 - p01));
                    if (t.y1 != t.y0) gv += g.rgba[c] * ((1.0 - t.tx) * (p01 - p00) + t.tx * (p11 - p10));
                }
                if (gu == 0.0 && gv == 0.0) {
                    continue;
                }
                // Through the ray/triangle intersection into the three vertex depths.
                const auto &tri = meshes.triangles[static_cast<std::size_t>(f.coverage.triangle)];
                const auto &verts = meshes.layers[static_cast<std::size_t>(j)].vertices;
                const Vec3 x0 = camera.pose.apply(verts[tri[0]]);
                const Vec3 e1 = camera.pose.apply(verts[tri[1]]) - x0;
                const Vec3 e2 = camera.pose.apply(verts[tri[2]]) - x0;
                const Vec3 ray = kinv * Vec3(x, y, 1.0);
                Mat3 mtx;
                mtx.col(0) = -ray;
                mtx.col(1) = e1;
                mtx.col(2) = e2;
                const double det = mtx.determinant();
                if (!(std::abs(det) > 1e-300)) {
                    continue;
                }
                const Vec2 &r0 = meshes.rays[tri[0]];
                const Vec2 &r1 = meshes.rays[tri[1]];
                const Vec2 &r2 = meshes.rays[tri[2]];
                const double gb1 = gu * (r1.x() - r0.x()) + gv * (r1.y() - r0.y());
                const double gb2 = gu * (r2.x() - r0.x()) + gv * (r2.y() - r0.y());
                const Vec3 adj = mtx.inverse().transpose() * Vec3(0.0, gb1, gb2);
                for (int i = 0; i < 3; ++i) {
                    g.depth[i] = -f.coverage.bary[i] * adj.dot(ray_dirs[tri[i]]);
                }
            }
        }
    });

    SceneGradients out;
    out.depths.assign(static_cast<std::size_t>(layers) * meshes.vertex_count(), 0.0);
    out.textures.reserve(static_cast<std::size_t>(layers));
    for (const auto &tex : scene.textures) {
        out.textures.emplace_back(tex.height(), tex.width(), 4);
    }
    // Sequential scatter in fixed (layer, y, x) order keeps sums reproducible.
    for (int j = 0; j < layers; ++j) {
        Image &gt = out.textures[static_cast<std::size_t>(j)];
        double *gd = out.depths.data() + static_cast<std::size_t>(j) * meshes.vertex_count();
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t idx = fragments.index(j, y, x);
                const FragmentGrad &g = grads[idx];
                if (!g.active) {
                    continue;
                }
                const Fragment &f = fragments.fragments[idx];
                const auto &t = f.texel;
                if (t.valid) {
                    const double w00 = (1.0 - t.tx) * (1.0 - t.ty);
                    const double w10 = t.tx * (1.0 - t.ty);
                    const double w01 = (1.0 - t.tx) * t.ty;
                    const double w11 = t.tx * t.ty;
                    for (int c = 0; c < 4; ++c) {
                        gt.at(t.y0, t.x0, c) += w00 * g.rgba[c];
                        gt.at(t.y0, t.x1, c) += w10 * g.rgba[c];
                        gt.at(t.y1, t.x0, c) += w01 * g.rgba[c];
                        gt.at(t.y1, t.x1, c) += w11 * g.rgba[c];
                    }
                }
                const auto &tri = meshes.triangles[static_cast<std::size_t>(f.coverage.triangle)];
                for (int i = 0; i < 3; ++i) {
                    gd[tri[i]] += g.depth[i];
                }
            }
        }
    }
    return out;
}

} // namespace lm
