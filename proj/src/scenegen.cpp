// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#include "lm/scenegen.hpp"

#include "lm/archive.hpp"
#include "lm/image_io.hpp"
#include "lm/meshing.hpp"
#include "lm/random.hpp"
#include "lm/render.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <numbers>

namespace lm {
namespace {

using nlohmann::json;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Image make_texture(const LayerSpec &spec, int h, int w, std::mt19937_64 &rng) {
    Image tex(h, w, 4, 1.0);
    switch (spec.texture) {
    case TexturePattern::Checker: {
        const int cell = 6 + static_cast<int>(uniform01(rng) * 9.0);
        double c0[3], c1[3];
        for (int c = 0; c < 3; ++c) {
            c0[c] = uniform(rng, 0.1, 0.9);
            c1[c] = uniform(rng, 0.1, 0.9);
        }
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const bool odd = ((x / cell) + (y / cell)) % 2 != 0;
                for (int c = 0; c < 3; ++c) {
                    tex.at(y, x, c) = odd ? c1[c] : c0[c];
                }
            }
        }
        break;
    }
    case TexturePattern::Gradient: {
        const double theta = uniform(rng, 0.0, kTwoPi);
        double c0[3], c1[3];
        for (int c = 0; c < 3; ++c) {
            c0[c] = uniform(rng, 0.05, 0.95);
            c1[c] = uniform(rng, 0.05, 0.95);
        }
        const double half = 0.5 * std::hypot(w, h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double s =
                    std::clamp(0.5 + 0.5 * ((x - 0.5 * w) * std::cos(theta) + (y - 0.5 * h) * std::sin(theta)) / half,
                               0.0, 1.0);
                for (int c = 0; c < 3; ++c) {
                    tex.at(y, x, c) = (1.0 - s) * c0[c] + s * c1[c];
                }
            }
        }
        break;
    }
    case TexturePattern::Noise: {
        // Sum of a few random sinusoids per channel: smooth but nowhere periodic.
        constexpr int waves = 6;
        struct Wave { double kx, ky, phase; };
        Wave wv[3][waves];
        for (auto &channel : wv) {
            for (auto &v : channel) {
                const double period = uniform(rng, 5.0, 20.0);
                const double dir = uniform(rng, 0.0, kTwoPi);
                v = {kTwoPi / period * std::cos(dir), kTwoPi / period * std::sin(dir), uniform(rng, 0.0, kTwoPi)};
            }
        }
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                for (int c = 0; c < 3; ++c) {
                    double v = 0.5;
                    for (const auto &q : wv[c]) {
                        v += 0.07 * std::sin(q.kx * x + q.ky * y + q.phase);
                    }
                    tex.at(y, x, c) = v;
                }
            }
        }
        break;
    }
    }
    if (spec.alpha == AlphaPattern::Cutout) {
        // Union of two axis-aligned rectangles; alpha is exactly 0 or 1.
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                tex.at(y, x, 3) = 0.0;
            }
        }
        for (int r = 0; r < 2; ++r) {
            const int rw = static_cast<int>(uniform(rng, 0.25, 0.45) * w);
            const int rh = static_cast<int>(uniform(rng, 0.25, 0.45) * h);
            const int x0 = static_cast<int>(uniform(rng, 0.05, 0.95) * (w - rw));
            const int y0 = static_cast<int>(uniform(rng, 0.05, 0.95) * (h - rh));
            for (int y = y0; y < y0 + rh; ++y) {
                for (int x = x0; x < x0 + rw; ++x) {
                    tex.at(y, x, 3) = 1.0;
                }
            }
        }
    }
    return tex;
}

double alpha_at(const Image &tex, const Vec2 &p) {
    double rgba[4];
    if (!bilinear_sample(tex, p, rgba)) {
        return 0.0;
    }
    return rgba[3];
}

// Front-most layer with alpha > 0.5 under a continuous reference position, or -1.
int front_layer(const SyntheticScene &s, const Vec2 &p) {
    for (std::size_t j = 0; j < s.layers.size(); ++j) {
        if (alpha_at(s.scene.textures[j], p) > 0.5) {
            return static_cast<int>(j);
        }
    }
    return -1;
}

struct Hit {
    int layer = -1;
    Vec3 point = Vec3::Zero(); // reference frame
};

// Nearest valid intersection of the ray origin + s * dir (s > 0) with the layers.
Hit trace(const SyntheticScene &s, const Vec3 &origin, const Vec3 &dir) {
    const CameraIntrinsics &k = s.rig.reference;
    Hit best;
    double best_s = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < s.layers.size(); ++j) {
        const SyntheticLayer &layer = s.layers[j];
        double t = -1.0;
        if (layer.planar()) {
            // n . X = base with X = pixel_ray(p) * z reproduces depth_at.
            const Vec3 n(layer.spec.tilt_x, layer.spec.tilt_y, 1.0);
            const double denom = n.dot(dir);
            if (std::abs(denom) > 1e-300) {
                t = (layer.spec.base_depth - n.dot(origin)) / denom;
            }
        } else if (dir.z() > 1e-12) {
            const auto g = [&](double sv) {
                const Vec3 x = origin + sv * dir;
                return x.z() - layer.depth_at(project(x, k), k);
            };
            const double lo = std::max(1e-9, (layer.min_depth * (1.0 - 1e-6) - origin.z()) / dir.z());
            const double hi = (layer.max_depth * (1.0 + 1e-6) - origin.z()) / dir.z();
            if (hi > lo) {
                constexpr int steps = 256;
                double a = lo;
                double ga = g(a);
                for (int i = 1; i <= steps && t < 0.0; ++i) {
                    const double b = lo + (hi - lo) * i / steps;
                    const double gb = g(b);
                    if ((ga <= 0.0) != (gb <= 0.0)) {
                        double l = a, r = b, gl = ga;
                        for (int it = 0; it < 100; ++it) {
                            const double m = 0.5 * (l + r);
                            const double gm = g(m);
                            if ((gm <= 0.0) == (gl <= 0.0)) {
                                l = m;
                                gl = gm;
                            } else {
                                r = m;
                            }
                        }
                        t = 0.5 * (l + r);
                    }
                    a = b;
                    ga = gb;
                }
            }
        }
        if (!(t > 0.0) || t >= best_s) {
            continue;
        }
        const Vec3 x = origin + t * dir;
        if (!(x.z() > 0.0)) {
            continue;
        }
        if (alpha_at(s.scene.textures[j], project(x, k)) > 0.5) {
            best_s = t;
            best.layer = static_cast<int>(j);
            best.point = x;
        }
    }
    return best;
}

json intrinsics_json(const CameraIntrinsics &k) {
    return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

CameraIntrinsics intrinsics_from(const json &j) {
    CameraIntrinsics k{j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
                       j.at("cy").get<double>(),  j.at("width").get<int>(), j.at("height").get<int>()};
    k.validate();
    return k;
}

json pose_json(const RigidPose &p) {
    json rows = json::array();
    for (int r = 0; r < 3; ++r) {
        rows.push_back({p.rotation()(r, 0), p.rotation()(r, 1), p.rotation()(r, 2), p.translation()(r)});
    }
    return rows;
}

RigidPose pose_from(const json &j) {
    Mat3 r;
    Vec3 t;
    for (int i = 0; i < 3; ++i) {
        for (int c = 0; c < 3; ++c) {
            r(i, c) = j.at(i).at(c).get<double>();
        }
        t(i) = j.at(i).at(3).get<double>();
    }
    return RigidPose(r, t);
}

std::string_view name(DepthPattern p) {
    switch (p) {
    case DepthPattern::Constant: return "constant";
    case DepthPattern::Tilted: return "tilted";
    case DepthPattern::Wavy: return "wavy";
    }
    return "?";
}

std::string_view name(TexturePattern p) {
    switch (p) {
    case TexturePattern::Checker: return "checker";
    case TexturePattern::Gradient: return "gradient";
    case TexturePattern::Noise: return "noise";
    }
    return "?";
}

void write_text(const std::filesystem::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    }
}

json read_json(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception &e) {
        throw Error(ErrorCode::FormatError, path.string() + ": " + e.what());
    }
}

} // namespace

void SceneSpec::validate() const {
    const auto fail = [](const std::string &why) { throw Error(ErrorCode::InvalidSpec, why); };
    if (layers < 1) fail("at least one layer is required");
    if (width < 2 || height < 2) fail("resolution must be at least 2x2");
    if (!(focal >= 0.0) || !std::isfinite(focal)) fail("focal length must be non-negative");
    if (!(baseline >= 0.0) || !std::isfinite(baseline)) fail("baseline must be non-negative");
    if (!(depth_near > 0.0 && depth_far > depth_near)) fail("depth range must satisfy 0 < near < far");
    if (!novel_center.allFinite() || !std::isfinite(novel_yaw_deg)) fail("novel camera must be finite");
    if (!layer_specs.empty() && static_cast<int>(layer_specs.size()) != layers) {
        fail("layer_specs must be empty or list every layer");
    }
    for (const auto &l : layer_specs) {
        if (l.base_depth != 0.0 && !(l.base_depth >= depth_near && l.base_depth <= depth_far)) {
            fail("layer depth outside the depth range");
        }
        if (l.wave_amplitude < 0.0 || l.wave_amplitude >= 0.5) fail("wave amplitude must lie in [0, 0.5)");
    }
}

double SyntheticLayer::depth_at(const Vec2 &p, const CameraIntrinsics &k) const {
    switch (spec.depth) {
    case DepthPattern::Constant: return spec.base_depth;
    case DepthPattern::Tilted: {
        const Vec3 r = pixel_ray(p, k);
        return spec.base_depth / (spec.tilt_x * r.x() + spec.tilt_y * r.y() + 1.0);
    }
    case DepthPattern::Wavy:
        return spec.base_depth *
               (1.0 + spec.wave_amplitude * std::sin(wave_kx * p.x() + wave_px) * std::sin(wave_ky * p.y() + wave_py));
    }
    return spec.base_depth;
}

SyntheticScene generate(std::uint64_t seed, const SceneSpec &spec) {
    spec.validate();
    SyntheticScene s;
    s.seed = seed;
    s.spec = spec;
    std::mt19937_64 rng(seed);

    const int w = spec.width;
    const int h = spec.height;
    const double f = spec.focal > 0.0 ? spec.focal : static_cast<double>(w);
    const CameraIntrinsics k{f, f, 0.5 * (w - 1), 0.5 * (h - 1), w, h};
    s.rig.reference = k;
    s.rig.side = {k, RigidPose::translation_only(Vec3(-spec.baseline, 0.0, 0.0))};
    const double yaw = spec.novel_yaw_deg * std::numbers::pi / 180.0;
    Mat3 ry;
    ry << std::cos(yaw), 0.0, std::sin(yaw), 0.0, 1.0, 0.0, -std::sin(yaw), 0.0, std::cos(yaw);
    const Vec3 centre = spec.novel_center * spec.baseline;
    s.rig.novel = {k, RigidPose(ry, -(ry * centre))};

    const int n = spec.layers;
    const double inv_front = 1.0 / std::min(1.5 * spec.depth_near, spec.depth_far);
    const double inv_back = 1.0 / std::max(0.5 * spec.depth_far, spec.depth_near);
    const double rx = std::max(k.cx, w - 1 - k.cx) / k.fx;
    const double ry_max = std::max(k.cy, h - 1 - k.cy) / k.fy;
    s.layers.resize(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        LayerSpec ls;
        if (!spec.layer_specs.empty()) {
            ls = spec.layer_specs[static_cast<std::size_t>(j)];
        } else {
            static constexpr DepthPattern depths[] = {DepthPattern::Constant, DepthPattern::Tilted,
                                                      DepthPattern::Wavy};
            static constexpr TexturePattern textures[] = {TexturePattern::Noise, TexturePattern::Checker,
                                                          TexturePattern::Noise, TexturePattern::Gradient};
            ls.depth = j + 1 == n ? DepthPattern::Constant : depths[rng() % 3];
            ls.texture = textures[rng() % 4];
        }
        if (ls.alpha == AlphaPattern::Auto) {
            ls.alpha = j + 1 == n ? AlphaPattern::Opaque : AlphaPattern::Cutout;
        }
        if (ls.base_depth == 0.0) {
            const double t = n == 1 ? 0.5 : static_cast<double>(j) / (n - 1);
            ls.base_depth = 1.0 / ((1.0 - t) * inv_front + t * inv_back);
        }
        SyntheticLayer &layer = s.layers[static_cast<std::size_t>(j)];
        if (ls.depth == DepthPattern::Tilted && ls.tilt_x == 0.0 && ls.tilt_y == 0.0) {
            ls.tilt_x = uniform(rng, -0.15, 0.15) / rx;
            ls.tilt_y = uniform(rng, -0.15, 0.15) / ry_max;
        }
        if (ls.depth == DepthPattern::Wavy) {
            if (ls.wave_amplitude == 0.0) ls.wave_amplitude = 0.04;
            layer.wave_kx = kTwoPi / uniform(rng, 24.0, 48.0);
            layer.wave_ky = kTwoPi / uniform(rng, 24.0, 48.0);
            layer.wave_px = uniform(rng, 0.0, kTwoPi);
            layer.wave_py = uniform(rng, 0.0, kTwoPi);
        }
        layer.spec = ls;
        switch (ls.depth) {
        case DepthPattern::Constant:
            layer.min_depth = layer.max_depth = ls.base_depth;
            break;
        case DepthPattern::Tilted: {
            // Inverse depth is affine in the pixel, so the extremes sit at the corners.
            layer.min_depth = std::numeric_limits<double>::infinity();
            layer.max_depth = 0.0;
            for (const Vec2 &c : {Vec2(0, 0), Vec2(w - 1, 0), Vec2(0, h - 1), Vec2(w - 1, h - 1)}) {
                const double d = layer.depth_at(c, k);
                if (!(d > 0.0)) {
                    throw Error(ErrorCode::InvalidSpec, "tilted layer crosses the camera plane");
                }
                layer.min_depth = std::min(layer.min_depth, d);
                layer.max_depth = std::max(layer.max_depth, d);
            }
            break;
        }
        case DepthPattern::Wavy:
            layer.min_depth = ls.base_depth * (1.0 - ls.wave_amplitude);
            layer.max_depth = ls.base_depth * (1.0 + ls.wave_amplitude);
            break;
        }
        if (layer.min_depth < spec.depth_near || layer.max_depth > spec.depth_far) {
            throw Error(ErrorCode::InvalidSpec, "layer " + std::to_string(j) + " leaves the depth range");
        }
        if (j > 0 && !(s.layers[static_cast<std::size_t>(j) - 1].max_depth < layer.min_depth)) {
            throw Error(ErrorCode::InvalidSpec, "layers " + std::to_string(j - 1) + " and " + std::to_string(j) +
                                                    " overlap in depth");
        }
    }

    s.depths = DepthLayerSet(n, h, w, DepthScheme::BI);
    s.scene.textures.reserve(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const SyntheticLayer &layer = s.layers[static_cast<std::size_t>(j)];
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                s.depths.at(j, y, x) = layer.depth_at(Vec2(x, y), k);
            }
        }
        s.scene.textures.push_back(make_texture(layer.spec, h, w, rng));
    }
    s.scene.meshes = mesh_layers(s.depths, k);
    s.scene.depth_near = spec.depth_near;
    s.scene.depth_far = spec.depth_far;
    return s;
}

Correspondences analytic_correspondences(const SyntheticScene &s, const Camera &target) {
    const CameraIntrinsics &kr = s.rig.reference;
    const CameraIntrinsics &kt = target.intrinsics;
    Correspondences c;
    c.ref_to_target = FlowField(kr.height, kr.width);
    c.target_to_ref = FlowField(kt.height, kt.width);
    c.covisible = Mask(kt.height, kt.width, false);
    c.disoccluded = Mask(kt.height, kt.width, false);
    c.out_of_view = Mask(kt.height, kt.width, false);

    std::vector<int> ref_layer(static_cast<std::size_t>(kr.height) * kr.width, -1);
    for (int y = 0; y < kr.height; ++y) {
        for (int x = 0; x < kr.width; ++x) {
            const Vec2 p(x, y);
            const int j = front_layer(s, p);
            ref_layer[static_cast<std::size_t>(y) * kr.width + x] = j;
            bool ok = false;
            if (j >= 0) {
                const Vec3 xt = target.pose.apply(pixel_ray(p, kr) * s.layers[static_cast<std::size_t>(j)].depth_at(p, kr));
                if (xt.z() > 0.0) {
                    c.ref_to_target.set(y, x, project(xt, kt));
                    ok = true;
                }
            }
            c.ref_to_target.valid.set(y, x, ok);
        }
    }

    const Vec3 origin = target.pose.center();
    const Mat3 rt = target.pose.rotation().transpose();
    for (int y = 0; y < kt.height; ++y) {
        for (int x = 0; x < kt.width; ++x) {
            const Hit hit = trace(s, origin, rt * pixel_ray(Vec2(x, y), kt));
            if (hit.layer < 0) {
                c.target_to_ref.valid.set(y, x, false);
                c.out_of_view.set(y, x, true);
                continue;
            }
            const Vec2 p = project(hit.point, kr);
            c.target_to_ref.set(y, x, p);
            if (front_layer(s, p) != hit.layer) {
                c.disoccluded.set(y, x, true);
                continue;
            }
            const auto f = bilinear_footprint(p, kr.width, kr.height);
            bool same = f.valid;
            for (const auto &[yy, xx] : {std::pair{f.y0, f.x0}, {f.y0, f.x1}, {f.y1, f.x0}, {f.y1, f.x1}}) {
                same = same && ref_layer[static_cast<std::size_t>(yy) * kr.width + xx] == hit.layer &&
                       c.ref_to_target.valid(yy, xx);
            }
            c.covisible.set(y, x, same);
        }
    }
    return c;
}

GroundTruthViews ground_truth_views(const SyntheticScene &s, int threads) {
    RenderOptions opts;
    opts.threads = threads;
    const CameraIntrinsics &k = s.rig.reference;
    GroundTruthViews v;
    v.reference = render(s.scene, s.rig.reference_camera(), k.height, k.width, opts).color;
    v.side = render(s.scene, s.rig.side, s.rig.side.intrinsics.height, s.rig.side.intrinsics.width, opts).color;
    v.novel = render(s.scene, s.rig.novel, s.rig.novel.intrinsics.height, s.rig.novel.intrinsics.width, opts).color;
    v.reference_depth = Image(k.height, k.width, 1);
    for (int y = 0; y < k.height; ++y) {
        for (int x = 0; x < k.width; ++x) {
            const int j = front_layer(s, Vec2(x, y));
            if (j >= 0) {
                v.reference_depth.at(y, x) = s.depths.at(j, y, x);
            }
        }
    }
    v.novel_flow = analytic_correspondences(s, s.rig.novel);
    return v;
}

MultiPlaneImage mpi_from_scene(const SyntheticScene &s, const PlaneStack &planes) {
    const CameraIntrinsics &k = s.rig.reference;
    MultiPlaneImage mpi;
    mpi.reference = k;
    mpi.planes = planes;
    mpi.rgba.assign(planes.size(), Image(k.height, k.width, 4));
    const auto d = planes.depths();
    for (std::size_t j = 0; j < s.layers.size(); ++j) {
        const Image &tex = s.scene.textures[j];
        for (int y = 0; y < k.height; ++y) {
            for (int x = 0; x < k.width; ++x) {
                const double inv = 1.0 / s.depths.at(static_cast<int>(j), y, x);
                std::size_t best = 0;
                for (std::size_t m = 1; m < d.size(); ++m) {
                    if (std::abs(1.0 / d[m] - inv) < std::abs(1.0 / d[best] - inv)) best = m;
                }
                // Straight-alpha "over" of this layer under whatever is already on the plane.
                Image &plane = mpi.rgba[best];
                const double ae = plane.at(y, x, 3);
                const double aj = tex.at(y, x, 3);
                const double a = ae + aj * (1.0 - ae);
                for (int c = 0; c < 3; ++c) {
                    plane.at(y, x, c) = a > 0.0 ? (plane.at(y, x, c) * ae + tex.at(y, x, c) * aj * (1.0 - ae)) / a : 0.0;
                }
                plane.at(y, x, 3) = a;
            }
        }
    }
    return mpi;
}

void write_mpi(const std::filesystem::path &dir, const MultiPlaneImage &mpi) {
    mpi.validate();
    std::filesystem::create_directories(dir);
    json j;
    j["intrinsics"] = intrinsics_json(mpi.reference);
    j["planes"] = json::array();
    for (std::size_t m = 0; m < mpi.planes.size(); ++m) {
        char base[32];
        std::snprintf(base, sizeof base, "plane_%03zu", m);
        Image rgb(mpi.height(), mpi.width(), 3);
        Image alpha(mpi.height(), mpi.width(), 1);
        for (int y = 0; y < mpi.height(); ++y) {
            for (int x = 0; x < mpi.width(); ++x) {
                for (int c = 0; c < 3; ++c) rgb.at(y, x, c) = mpi.rgba[m].at(y, x, c);
                alpha.at(y, x) = mpi.rgba[m].at(y, x, 3);
            }
        }
        io::write_ppm(dir / (std::string(base) + ".ppm"), rgb);
        io::write_pfm(dir / (std::string(base) + "_alpha.pfm"), alpha);
        j["planes"].push_back({{"depth", mpi.planes[m]},
                               {"color", std::string(base) + ".ppm"},
                               {"alpha", std::string(base) + "_alpha.pfm"}});
    }
    write_text(dir / "mpi.json", j.dump(2) + "\n");
}

MultiPlaneImage read_mpi(const std::filesystem::path &dir) {
    const json j = read_json(dir / "mpi.json");
    try {
        MultiPlaneImage mpi;
        mpi.reference = intrinsics_from(j.at("intrinsics"));
        std::vector<double> depths;
        for (const auto &p : j.at("planes")) {
            depths.push_back(p.at("depth").get<double>());
            const Image rgb = io::read_ppm(dir / p.at("color").get<std::string>());
            const Image alpha = io::read_pfm(dir / p.at("alpha").get<std::string>());
            if (rgb.height() != mpi.height() || rgb.width() != mpi.width() || !alpha.same_shape(Image(rgb.height(), rgb.width(), 1))) {
                throw Error(ErrorCode::FormatError, "MPI plane images do not match the intrinsics");
            }
            Image rgba(rgb.height(), rgb.width(), 4);
            for (int y = 0; y < rgb.height(); ++y) {
                for (int x = 0; x < rgb.width(); ++x) {
                    for (int c = 0; c < 3; ++c) rgba.at(y, x, c) = rgb.at(y, x, c);
                    rgba.at(y, x, 3) = std::clamp(alpha.at(y, x), 0.0, 1.0);
                }
            }
            mpi.rgba.push_back(std::move(rgba));
        }
        mpi.planes = PlaneStack(std::move(depths));
        return mpi;
    } catch (const json::exception &e) {
        throw Error(ErrorCode::FormatError, "mpi.json: " + std::string(e.what()));
    }
}

void write_bundle(const std::filesystem::path &dir, const SyntheticScene &s, const GroundTruthViews &v,
                  int mpi_planes) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
    }
    io::write_ppm(dir / "reference.ppm", v.reference);
    io::write_ppm(dir / "side.ppm", v.side);
    io::write_ppm(dir / "novel.ppm", v.novel);
    io::write_pfm(dir / "depth_reference.pfm", v.reference_depth);
    for (int j = 0; j < s.depths.layers; ++j) {
        Image d(s.depths.height, s.depths.width, 1);
        const auto src = s.depths.layer(j);
        std::copy(src.begin(), src.end(), d.data().begin());
        io::write_pfm(dir / ("layer_depth_" + std::to_string(j) + ".pfm"), d);
    }
    write_flow_pfm(dir / "flow_rn.pfm", v.novel_flow.ref_to_target);
    write_flow_pfm(dir / "flow_nr.pfm", v.novel_flow.target_to_ref);
    io::write_pgm(dir / "covisible.pgm", v.novel_flow.covisible);
    io::write_pgm(dir / "disoccluded.pgm", v.novel_flow.disoccluded);
    io::write_pgm(dir / "out_of_view.pgm", v.novel_flow.out_of_view);
    export_scene(s.scene, dir / "gt.lms");

    std::ostringstream cams;
    cams << std::setprecision(17);
    const auto line = [&](const char *label, const CameraIntrinsics &k, const RigidPose &p) {
        cams << label << ' ' << k.fx << ' ' << k.fy << ' ' << k.cx << ' ' << k.cy << ' ' << k.width << ' '
             << k.height;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) cams << ' ' << p.rotation()(r, c);
            cams << ' ' << p.translation()(r);
        }
        cams << '\n';
    };
    cams << "# name fx fy cx cy width height then the 3x4 pose [R|t] row-major (reference -> camera)\n";
    line("reference", s.rig.reference, RigidPose::identity());
    line("side", s.rig.side.intrinsics, s.rig.side.pose);
    line("novel", s.rig.novel.intrinsics, s.rig.novel.pose);
    write_text(dir / "cameras.txt", cams.str());

    json j;
    j["seed"] = s.seed;
    j["layers"] = s.spec.layers;
    j["width"] = s.spec.width;
    j["height"] = s.spec.height;
    j["baseline"] = s.spec.baseline;
    j["depth_range"] = {{"near", s.spec.depth_near}, {"far", s.spec.depth_far}};
    j["cameras"] = {{"reference", {{"intrinsics", intrinsics_json(s.rig.reference)}}},
                    {"side", {{"intrinsics", intrinsics_json(s.rig.side.intrinsics)}, {"pose", pose_json(s.rig.side.pose)}}},
                    {"novel", {{"intrinsics", intrinsics_json(s.rig.novel.intrinsics)}, {"pose", pose_json(s.rig.novel.pose)}}}};
    json layers = json::array();
    for (const auto &l : s.layers) {
        layers.push_back({{"depth_pattern", name(l.spec.depth)},
                          {"texture", name(l.spec.texture)},
                          {"opaque", l.spec.alpha == AlphaPattern::Opaque},
                          {"base_depth", l.spec.base_depth},
                          {"min_depth", l.min_depth},
                          {"max_depth", l.max_depth}});
    }
    j["ground_truth_layers"] = layers;
    j["files"] = {{"reference", "reference.ppm"}, {"side", "side.ppm"},     {"novel", "novel.ppm"},
                  {"flow_rn", "flow_rn.pfm"},     {"flow_nr", "flow_nr.pfm"}, {"scene", "gt.lms"}};
    if (mpi_planes > 0) {
        write_mpi(dir / "mpi", mpi_from_scene(s, place_planes(s.spec.depth_near, s.spec.depth_far, mpi_planes)));
        j["files"]["mpi"] = "mpi";
    }
    write_text(dir / "scene.json", j.dump(2) + "\n");
}

Bundle read_bundle(const std::filesystem::path &dir) {
    const json j = read_json(dir / "scene.json");
    Bundle b;
    b.dir = dir;
    try {
        const auto &cams = j.at("cameras");
        b.rig.reference = intrinsics_from(cams.at("reference").at("intrinsics"));
        b.rig.side = {intrinsics_from(cams.at("side").at("intrinsics")), pose_from(cams.at("side").at("pose"))};
        b.rig.novel = {intrinsics_from(cams.at("novel").at("intrinsics")), pose_from(cams.at("novel").at("pose"))};
        b.depth_near = j.at("depth_range").at("near").get<double>();
        b.depth_far = j.at("depth_range").at("far").get<double>();
        const auto &files = j.at("files");
        b.reference = io::read_ppm(dir / files.at("reference").get<std::string>());
        b.side = io::read_ppm(dir / files.at("side").get<std::string>());
        b.novel = io::read_ppm(dir / files.at("novel").get<std::string>());
        b.gt_scene = dir / files.at("scene").get<std::string>();
    } catch (const json::exception &e) {
        throw Error(ErrorCode::FormatError, "scene.json: " + std::string(e.what()));
    }
    if (b.reference.height() != b.rig.reference.height || b.reference.width() != b.rig.reference.width) {
        throw Error(ErrorCode::FormatError, "reference view does not match its intrinsics");
    }
    return b;
}

} // namespace lm
