// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#include "lm/gradcheck.hpp"

#include "lm/losses.hpp"
#include "lm/meshing.hpp"
#include "lm/random.hpp"
#include "lm/render.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace lm {
namespace {

// Distinct stream per suite so that suites can be run on their own.
std::mt19937_64 suite_rng(const GradcheckOptions &opts, std::uint64_t salt) {
    return std::mt19937_64(opts.seed * 0x9E3779B97F4A7C15ULL + salt);
}

void record(GradcheckResult &r, std::span<const double> analytic, std::span<const double> numeric) {
    r.max_rel_error = std::max(r.max_rel_error, relative_error(analytic, numeric));
    ++r.configs;
    r.probes += static_cast<int>(numeric.size());
}

struct RenderProblem {
    TexturedScene scene;
    Camera camera;
    Image up_color;
    Image up_alpha;
    int height = 16;
    int width = 16;
};

RenderProblem random_render_problem(std::mt19937_64 &rng) {
    RenderProblem pb;
    const CameraIntrinsics k{16.0, 16.0, 7.5, 7.5, 16, 16};
    const int gh = 6;
    const int gw = 6;
    DepthLayerSet depths(2, gh, gw, DepthScheme::BI);
    const double base[2] = {uniform(rng, 2.0, 2.5), uniform(rng, 3.5, 4.5)};
    for (int j = 0; j < 2; ++j) {
        for (int y = 0; y < gh; ++y) {
            for (int x = 0; x < gw; ++x) {
                depths.at(j, y, x) = base[j] + uniform(rng, -0.2, 0.2);
            }
        }
    }
    pb.scene.meshes = mesh_layers(depths, k);
    for (int j = 0; j < 2; ++j) {
        Image tex(k.height, k.width, 4);
        for (int y = 0; y < k.height; ++y) {
            for (int x = 0; x < k.width; ++x) {
                for (int c = 0; c < 3; ++c) tex.at(y, x, c) = uniform01(rng);
                tex.at(y, x, 3) = uniform(rng, 0.2, 0.9);
            }
        }
        pb.scene.textures.push_back(std::move(tex));
    }
    Vec3 axis(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    axis.normalize();
    const Mat3 rot = Eigen::AngleAxisd(uniform(rng, 0.0, 0.08), axis).toRotationMatrix();
    const Vec3 t(uniform(rng, -0.15, 0.15), uniform(rng, -0.15, 0.15), uniform(rng, -0.1, 0.1));
    pb.camera = {k, RigidPose(rot, t)};
    pb.up_color = Image(pb.height, pb.width, 3);
    pb.up_alpha = Image(pb.height, pb.width, 1);
    for (double &v : pb.up_color.data()) v = normal_pair(rng).first;
    for (double &v : pb.up_alpha.data()) v = normal_pair(rng).first;
    return pb;
}

double render_objective(const RenderProblem &pb, const FragmentBuffer &frags) {
    const RenderOutput out = composite(frags);
    double v = 0.0;
    for (std::size_t i = 0; i < out.color.data().size(); ++i) v += pb.up_color.data()[i] * out.color.data()[i];
    for (std::size_t i = 0; i < out.alpha.data().size(); ++i) v += pb.up_alpha.data()[i] * out.alpha.data()[i];
    return v;
}

} // namespace

double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
    double diff = 0.0;
    double na = 0.0;
    double nn = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
        na += analytic[i] * analytic[i];
        nn += numeric[i] * numeric[i];
    }
    const double scale = std::sqrt(std::max(na, nn));
    diff = std::sqrt(diff);
    return scale < 1e-12 ? diff : diff / scale;
}

GradcheckResult check_aggregate(DepthScheme scheme, SoftAverage mode, const GradcheckOptions &opts) {
    GradcheckResult r;
    r.name = "aggregate_" + std::string(to_string(scheme));
    if (scheme == DepthScheme::SA && mode == SoftAverage::InverseDepth) r.name += "_inverse";
    r.tolerance = 1e-5;
    auto rng = suite_rng(opts, 11 + static_cast<int>(scheme) * 2 + static_cast<int>(mode));
    static constexpr int plane_counts[] = {4, 8, 12, 32};
    for (int cfg = 0; cfg < opts.configs; ++cfg) {
        const int p = plane_counts[rng() % 4];
        static constexpr int layer_choices[] = {1, 2, 4};
        const int layers = layer_choices[rng() % 3];
        const PlaneStack planes = place_planes(uniform(rng, 0.5, 2.0), uniform(rng, 10.0, 100.0), p);
        BetaVolume beta = scheme == DepthScheme::GC   ? BetaVolume::gc(1, 1, p)
                          : scheme == DepthScheme::SA ? BetaVolume::sa(1, 1, layers, p)
                                                      : BetaVolume::bi(1, 1, layers);
        for (double &v : beta.values) {
            v = scheme == DepthScheme::SA ? 2.0 * normal_pair(rng).first : uniform(rng, 0.05, 0.95);
        }
        const Eigen::MatrixXd jac = aggregate_jacobian(beta, planes, layers, 0, 0, mode);
        Eigen::MatrixXd fd(jac.rows(), jac.cols());
        for (int c = 0; c < beta.channels(); ++c) {
            BetaVolume plus = beta;
            BetaVolume minus = beta;
            plus.values[c] += opts.step;
            minus.values[c] -= opts.step;
            const auto dp = aggregate(plus, planes, layers, mode);
            const auto dm = aggregate(minus, planes, layers, mode);
            for (int j = 0; j < jac.rows(); ++j) {
                fd(j, c) = (dp.depths[j] - dm.depths[j]) / (2.0 * opts.step);
            }
        }
        record(r, std::span(jac.data(), jac.size()), std::span(fd.data(), fd.size()));
    }
    return r;
}

GradcheckResult check_compose_over(const GradcheckOptions &opts) {
    GradcheckResult r;
    r.name = "compose_over";
    r.tolerance = 1e-3;
    auto rng = suite_rng(opts, 31);
    for (int cfg = 0; cfg < opts.configs; ++cfg) {
        const int n = 1 + static_cast<int>(rng() % 6);
        std::vector<ColorAlpha> frags(static_cast<std::size_t>(n));
        for (auto &f : frags) {
            for (double &c : f.color) c = uniform01(rng);
            f.alpha = uniform(rng, 0.05, 0.95);
        }
        const std::array<double, 3> gc{normal_pair(rng).first, normal_pair(rng).first, normal_pair(rng).first};
        const double ga = normal_pair(rng).first;
        const auto objective = [&](const std::vector<ColorAlpha> &f) {
            const ColorAlpha out = compose_over(f);
            return gc[0] * out.color[0] + gc[1] * out.color[1] + gc[2] * out.color[2] + ga * out.alpha;
        };
        const auto grads = compose_over_backward(frags, gc, ga);
        std::vector<double> analytic;
        std::vector<double> numeric;
        for (int k = 0; k < n; ++k) {
            for (int c = 0; c < 4; ++c) {
                auto plus = frags;
                auto minus = frags;
                double &vp = c < 3 ? plus[k].color[c] : plus[k].alpha;
                double &vm = c < 3 ? minus[k].color[c] : minus[k].alpha;
                vp += opts.step;
                vm -= opts.step;
                numeric.push_back((objective(plus) - objective(minus)) / (2.0 * opts.step));
                analytic.push_back(c < 3 ? grads[k].color[c] : grads[k].alpha);
            }
        }
        record(r, analytic, numeric);
    }
    return r;
}

GradcheckResult check_render(RenderParameter param, const GradcheckOptions &opts) {
    GradcheckResult r;
    r.name = param == RenderParameter::Depth ? "render_depth" : param == RenderParameter::Alpha ? "render_alpha"
                                                                                                 : "render_color";
    r.tolerance = 1e-3;
    auto rng = suite_rng(opts, 41 + static_cast<int>(param));
    for (int attempt = 0; r.configs < opts.configs && attempt < 4 * opts.configs; ++attempt) {
        RenderProblem pb = random_render_problem(rng);
        const FragmentBuffer base = rasterize(pb.scene, pb.camera, pb.height, pb.width);
        const SceneGradients g = render_backward(pb.scene, pb.camera, base, pb.up_color, &pb.up_alpha);

        // Candidate parameters: those the analytic pass says the output depends on.
        struct Coord { int layer, index, channel; double analytic; };
        std::vector<Coord> candidates;
        const int layers = pb.scene.layer_count();
        if (param == RenderParameter::Depth) {
            const int nv = static_cast<int>(pb.scene.meshes.vertex_count());
            for (int j = 0; j < layers; ++j) {
                for (int v = 0; v < nv; ++v) {
                    const double a = g.depths[static_cast<std::size_t>(j) * nv + v];
                    if (a != 0.0) candidates.push_back({j, v, 0, a});
                }
            }
        } else {
            for (int j = 0; j < layers; ++j) {
                const Image &gt = g.textures[static_cast<std::size_t>(j)];
                for (int i = 0; i < static_cast<int>(gt.pixel_count()); ++i) {
                    for (int c = 0; c < 4; ++c) {
                        if ((param == RenderParameter::Alpha) != (c == 3)) continue;
                        const double a = gt.data()[static_cast<std::size_t>(i) * 4 + c];
                        if (a != 0.0) candidates.push_back({j, i, c, a});
                    }
                }
            }
        }
        if (candidates.empty()) {
            continue;
        }
        std::vector<double> analytic;
        std::vector<double> numeric;
        for (int probe = 0; probe < opts.coordinates; ++probe) {
            const Coord &c = candidates[rng() % candidates.size()];
            const auto perturbed = [&](double delta) {
                TexturedScene s = pb.scene;
                if (param == RenderParameter::Depth) {
                    s.meshes.layers[static_cast<std::size_t>(c.layer)].depths[static_cast<std::size_t>(c.index)] += delta;
                    s.meshes.update_vertices(c.layer);
                } else {
                    s.textures[static_cast<std::size_t>(c.layer)].data()[static_cast<std::size_t>(c.index) * 4 + c.channel] += delta;
                }
                return s;
            };
            const TexturedScene sp = perturbed(opts.step);
            const TexturedScene sm = perturbed(-opts.step);
            const FragmentBuffer fp = rasterize(sp, pb.camera, pb.height, pb.width);
            const FragmentBuffer fm = rasterize(sm, pb.camera, pb.height, pb.width);
            if (!same_coverage(base, fp) || !same_coverage(base, fm)) {
                ++r.coverage_changed;
                continue;
            }
            numeric.push_back((render_objective(pb, fp) - render_objective(pb, fm)) / (2.0 * opts.step));
            analytic.push_back(c.analytic);
        }
        if (!numeric.empty()) {
            record(r, analytic, numeric);
        }
    }
    return r;
}

GradcheckResult check_l1(const GradcheckOptions &opts) {
    GradcheckResult r;
    r.name = "l1_loss";
    r.tolerance = 1e-4;
    auto rng = suite_rng(opts, 51);
    for (int cfg = 0; cfg < opts.configs; ++cfg) {
        Image a(6, 7, 3);
        Image b(6, 7, 3);
        for (std::size_t i = 0; i < a.data().size(); ++i) {
            a.data()[i] = uniform01(rng);
            // Stay clear of the kink at a == b.
            const double gap = uniform(rng, 0.01, 0.5);
            b.data()[i] = a.data()[i] + (rng() % 2 ? gap : -gap);
        }
        const LossReport rep = l1_loss(a, b);
        std::vector<double> numeric(a.data().size());
        for (std::size_t i = 0; i < numeric.size(); ++i) {
            Image p = a;
            Image m = a;
            p.data()[i] += opts.step;
            m.data()[i] -= opts.step;
            numeric[i] = (l1_loss(p, b).value - l1_loss(m, b).value) / (2.0 * opts.step);
        }
        record(r, rep.gradient, numeric);
    }
    return r;
}

namespace {

DepthLayerSet random_depths(std::mt19937_64 &rng, int layers, int h, int w) {
    DepthLayerSet d(layers, h, w, DepthScheme::SA);
    for (double &v : d.depths) {
        v = uniform(rng, 1.0, 10.0);
    }
    return d;
}

bool kink_free(const DepthLayerSet &d, double margin) {
    for (int j = 0; j < d.layers; ++j) {
        for (int y = 0; y < d.height; ++y) {
            for (int x = 0; x < d.width; ++x) {
                const double v = d.at(j, y, x);
                if (j + 1 < d.layers && std::abs(v - d.at(j + 1, y, x)) < margin) return false;
                if (y + 1 < d.height && std::abs(v - d.at(j, y + 1, x)) < margin) return false;
                if (x + 1 < d.width && std::abs(v - d.at(j, y, x + 1)) < margin) return false;
            }
        }
    }
    return true;
}

GradcheckResult check_depth_loss(const char *name, std::uint64_t salt, const GradcheckOptions &opts,
                                 const std::function<LossReport(const DepthLayerSet &)> &loss) {
    GradcheckResult r;
    r.name = name;
    r.tolerance = 1e-4;
    auto rng = suite_rng(opts, salt);
    while (r.configs < opts.configs) {
        DepthLayerSet d = random_depths(rng, 3, 4, 5);
        // Hinge and absolute-value kinks are excluded by construction.
        if (!kink_free(d, 0.01)) {
            continue;
        }
        const LossReport rep = loss(d);
        std::vector<double> numeric(d.depths.size());
        for (std::size_t i = 0; i < numeric.size(); ++i) {
            DepthLayerSet p = d;
            DepthLayerSet m = d;
            p.depths[i] += opts.step;
            m.depths[i] -= opts.step;
            numeric[i] = (loss(p).value - loss(m).value) / (2.0 * opts.step);
        }
        record(r, rep.gradient, numeric);
    }
    return r;
}

} // namespace

GradcheckResult check_ordering(const GradcheckOptions &opts) {
    return check_depth_loss("ordering_loss", 61, opts, [](const DepthLayerSet &d) { return ordering_loss(d); });
}

GradcheckResult check_tv(const GradcheckOptions &opts) {
    return check_depth_loss("tv_loss", 71, opts, [](const DepthLayerSet &d) { return tv_loss(d); });
}

std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions &opts) {
    return {check_aggregate(DepthScheme::GC, SoftAverage::Linear, opts),
            check_aggregate(DepthScheme::SA, SoftAverage::Linear, opts),
            check_aggregate(DepthScheme::SA, SoftAverage::InverseDepth, opts),
            check_aggregate(DepthScheme::BI, SoftAverage::Linear, opts),
            check_compose_over(opts),
            check_render(RenderParameter::Depth, opts),
            check_render(RenderParameter::Alpha, opts),
            check_render(RenderParameter::Color, opts),
            check_l1(opts),
            check_ordering(opts),
            check_tv(opts)};
}

} // namespace lm
