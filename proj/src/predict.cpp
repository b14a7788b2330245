// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#include "lm/predict.hpp"

#include "lm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace lm {
namespace {

constexpr double kMaskedLogit = -1e9;

void softmax_into(std::span<const double> z, std::span<double> w) {
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        w[i] = std::exp(z[i] - mx);
        sum += w[i];
    }
    for (double &v : w) {
        v /= sum;
    }
}

// Weights of plane k and k+1 that reproduce depth d, linearly or in inverse depth.
double pair_weight(double dk, double dk1, double d, SoftAverage mode) {
    if (mode == SoftAverage::InverseDepth) {
        return (1.0 / d - 1.0 / dk1) / (1.0 / dk - 1.0 / dk1);
    }
    return (dk1 - d) / (dk1 - dk);
}

// First index k in [first, last) with planes[k] <= d <= planes[k+1]; assumes d in range.
int bracket(std::span<const double> planes, int first, int last, double d) {
    int k = first;
    while (k + 1 < last && planes[k + 1] < d) {
        ++k;
    }
    return k;
}

} // namespace

GeometrySource parse_geometry_source(std::string_view s) {
    if (s == "oracle") return GeometrySource::Oracle;
    if (s == "photo") return GeometrySource::Photo;
    if (s == "constant") return GeometrySource::Constant;
    throw Error(ErrorCode::InvalidConfig, "unknown geometry predictor '" + std::string(s) + "'");
}

ColoringSource parse_coloring_source(std::string_view s) {
    if (s == "oracle") return ColoringSource::Oracle;
    if (s == "passthrough") return ColoringSource::Passthrough;
    throw Error(ErrorCode::InvalidConfig, "unknown colouring predictor '" + std::string(s) + "'");
}

// Matching costs closer than this are a tie (warps of identical views differ by round-off).
constexpr double kTieCost = 1e-9;

CostVolume photoconsistency_cost(const PlaneSweepVolume &psv, const PhotoConfig &cfg) {
    const int h = psv.height();
    const int w = psv.width();
    const int p = static_cast<int>(psv.planes.size());
    const int r = std::max(0, cfg.radius);
    CostVolume out;
    out.planes = p;
    out.height = h;
    out.width = w;
    out.cost.assign(static_cast<std::size_t>(h) * w * p, 0.0);
    out.any_valid = Mask(h, w, false);
    std::vector<std::uint8_t> plane_ok(static_cast<std::size_t>(h) * w * p, 0);

    parallel_for(static_cast<std::size_t>(p), cfg.threads, [&](std::size_t k) {
        const Image &slab = psv.slabs[k];
        const Mask &valid = psv.valid[k];
        // Separable box sums of the per-pixel difference and of the valid count.
        // Direct window sums (no running totals) keep equal inputs bit-equal.
        const std::size_t n = static_cast<std::size_t>(h) * w;
        std::vector<double> diff(n, 0.0), count(n, 0.0);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!valid(y, x)) continue;
                double d = 0.0;
                for (int c = 0; c < 3; ++c) {
                    d += std::abs(slab.at(y, x, c) - psv.reference.at(y, x, c));
                }
                diff[static_cast<std::size_t>(y) * w + x] = d / 3.0;
                count[static_cast<std::size_t>(y) * w + x] = 1.0;
            }
        }
        std::vector<double> rd(n), rn(n);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double sd = 0.0, sn = 0.0;
                for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx) {
                    sd += diff[static_cast<std::size_t>(y) * w + xx];
                    sn += count[static_cast<std::size_t>(y) * w + xx];
                }
                rd[static_cast<std::size_t>(y) * w + x] = sd;
                rn[static_cast<std::size_t>(y) * w + x] = sn;
            }
        }
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double sd = 0.0, sn = 0.0;
                for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy) {
                    sd += rd[static_cast<std::size_t>(yy) * w + x];
                    sn += rn[static_cast<std::size_t>(yy) * w + x];
                }
                const std::size_t idx = (static_cast<std::size_t>(y) * w + x) * p + k;
                if (sn > 0.5) {
                    out.cost[idx] = sd / sn;
                    plane_ok[idx] = 1;
                }
            }
        }
    });

    // Planes without valid samples get the worst valid cost at that pixel.
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t base = (static_cast<std::size_t>(y) * w + x) * p;
            double worst = -1.0;
            for (int k = 0; k < p; ++k) {
                if (plane_ok[base + k]) worst = std::max(worst, out.cost[base + k]);
            }
            if (worst < 0.0) {
                continue;
            }
            out.any_valid.set(y, x, true);
            for (int k = 0; k < p; ++k) {
                if (!plane_ok[base + k]) out.cost[base + k] = worst;
            }
        }
    }
    return out;
}

std::vector<int> cost_argmin(const CostVolume &cost) {
    std::vector<int> out(static_cast<std::size_t>(cost.height) * cost.width, 0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double *c = cost.cost.data() + i * cost.planes;
        out[i] = static_cast<int>(std::min_element(c, c + cost.planes) - c);
    }
    return out;
}

GeometryPrediction predict_geometry_photoconsistency(const PlaneSweepVolume &psv, DepthScheme scheme, int layers,
                                                     const PhotoConfig &cfg) {
    const int p = static_cast<int>(psv.planes.size());
    if (layers < 1 || p % layers != 0) {
        throw Error(ErrorCode::IndivisibleGroups,
                    std::to_string(layers) + " layers do not divide " + std::to_string(p) + " planes");
    }
    if (!(cfg.tau > 0.0)) {
        throw Error(ErrorCode::InvalidConfig, "temperature must be positive");
    }
    const CostVolume cost = photoconsistency_cost(psv, cfg);
    const int h = cost.height;
    const int w = cost.width;
    const int g = p / layers;
    const auto planes = psv.planes.depths();
    GeometryPrediction out;
    switch (scheme) {
    case DepthScheme::GC: out.beta = BetaVolume::gc(h, w, p); break;
    case DepthScheme::SA: out.beta = BetaVolume::sa(h, w, layers, p); break;
    case DepthScheme::BI: out.beta = BetaVolume::bi(h, w, layers); break;
    }
    std::vector<double> z(static_cast<std::size_t>(g)), wts(static_cast<std::size_t>(g));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const bool ok = cost.any_valid(y, x);
            if (!ok) {
                ++out.all_invalid;
            }
            auto b = out.beta.pixel(y, x);
            for (int j = 0; j < layers; ++j) {
                const int first = j * g;
                for (int i = 0; i < g; ++i) {
                    z[i] = ok ? -cost.at(y, x, first + i) / cfg.tau : 0.0;
                }
                if (scheme == DepthScheme::GC) {
                    // Stick-breaking opacities that composite to the softmax weights.
                    softmax_into(z, wts);
                    double used = 0.0;
                    for (int i = 0; i < g; ++i) {
                        const double rest = 1.0 - used;
                        b[first + i] = (i + 1 == g || rest <= 0.0) ? 1.0 : std::clamp(wts[i] / rest, 0.0, 1.0);
                        used += wts[i];
                    }
                } else if (scheme == DepthScheme::SA) {
                    auto row = b.subspan(static_cast<std::size_t>(j) * p, static_cast<std::size_t>(p));
                    std::fill(row.begin(), row.end(), kMaskedLogit);
                    for (int i = 0; i < g; ++i) {
                        row[first + i] = z[i];
                    }
                } else {
                    // BI: depth of the best plane in the group; a tied minimum means the
                    // group carries no information and falls back to its mean depth.
                    const auto best = std::max_element(z.begin(), z.end());
                    double d = planes[first + (best - z.begin())];
                    const double tie = kTieCost / cfg.tau;
                    if (std::count_if(z.begin(), z.end(), [&](double v) { return *best - v <= tie; }) > 1) {
                        d = 0.0;
                        for (int i = 0; i < g; ++i) d += planes[first + i];
                        d /= g;
                    }
                    b[j] = std::clamp((planes.back() - d) / (planes.back() - planes.front()), 0.0, 1.0);
                }
            }
        }
    }
    return out;
}

BetaVolume predict_geometry_constant(int height, int width, const PlaneStack &planes, DepthScheme scheme,
                                     int layers) {
    const int p = static_cast<int>(planes.size());
    if (layers < 1 || (scheme != DepthScheme::BI && p % layers != 0)) {
        throw Error(ErrorCode::IndivisibleGroups,
                    std::to_string(layers) + " layers do not divide " + std::to_string(p) + " planes");
    }
    switch (scheme) {
    case DepthScheme::GC: return BetaVolume::gc(height, width, p, 0.5);
    case DepthScheme::SA: {
        BetaVolume v = BetaVolume::sa(height, width, layers, p, kMaskedLogit);
        const int g = p / layers;
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                auto b = v.pixel(y, x);
                for (int j = 0; j < layers; ++j) {
                    for (int i = 0; i < g; ++i) {
                        b[static_cast<std::size_t>(j) * p + j * g + i] = 0.0;
                    }
                }
            }
        }
        return v;
    }
    case DepthScheme::BI: {
        BetaVolume v = BetaVolume::bi(height, width, layers);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                auto b = v.pixel(y, x);
                for (int j = 0; j < layers; ++j) {
                    b[j] = 1.0 - (j + 0.5) / layers;
                }
            }
        }
        return v;
    }
    }
    throw Error(ErrorCode::SchemeShapeMismatch, "unknown scheme");
}

BetaVolume predict_geometry_oracle(const DepthLayerSet &gt, const PlaneStack &planes, DepthScheme scheme,
                                   SoftAverage mode) {
    const int p = static_cast<int>(planes.size());
    const int layers = gt.layers;
    const auto d = planes.depths();
    for (double v : gt.depths) {
        if (!(v >= planes.nearest() && v <= planes.farthest())) {
            throw Error(ErrorCode::DepthOutOfRange, "ground-truth depth " + std::to_string(v) + " outside [" +
                                                        std::to_string(planes.nearest()) + ", " +
                                                        std::to_string(planes.farthest()) + "]");
        }
    }
    if (scheme == DepthScheme::BI) {
        BetaVolume v = BetaVolume::bi(gt.height, gt.width, layers);
        const double span = planes.farthest() - planes.nearest();
        for (int y = 0; y < gt.height; ++y) {
            for (int x = 0; x < gt.width; ++x) {
                auto b = v.pixel(y, x);
                for (int j = 0; j < layers; ++j) {
                    b[j] = std::clamp((planes.farthest() - gt.at(j, y, x)) / span, 0.0, 1.0);
                }
            }
        }
        return v;
    }
    if (scheme == DepthScheme::GC) {
        if (layers < 1 || p % layers != 0) {
            throw Error(ErrorCode::IndivisibleGroups,
                        std::to_string(layers) + " layers do not divide " + std::to_string(p) + " planes");
        }
        const int g = p / layers;
        BetaVolume v = BetaVolume::gc(gt.height, gt.width, p, 0.0);
        for (int y = 0; y < gt.height; ++y) {
            for (int x = 0; x < gt.width; ++x) {
                auto b = v.pixel(y, x);
                for (int j = 0; j < layers; ++j) {
                    const int first = j * g;
                    const int last = first + g - 1;
                    b[last] = 1.0;
                    if (g == 1) {
                        continue;
                    }
                    const double target = std::clamp(gt.at(j, y, x), d[first], d[last]);
                    const int k = bracket(d, first, last, target);
                    b[k] = std::clamp((d[k + 1] - target) / (d[k + 1] - d[k]), 0.0, 1.0);
                    b[k + 1] = 1.0;
                }
            }
        }
        return v;
    }
    BetaVolume v = BetaVolume::sa(gt.height, gt.width, layers, p, kMaskedLogit);
    for (int y = 0; y < gt.height; ++y) {
        for (int x = 0; x < gt.width; ++x) {
            auto b = v.pixel(y, x);
            for (int j = 0; j < layers; ++j) {
                auto row = b.subspan(static_cast<std::size_t>(j) * p, static_cast<std::size_t>(p));
                const double target = gt.at(j, y, x);
                const int k = bracket(d, 0, p - 1, target);
                const double wk = std::clamp(pair_weight(d[k], d[k + 1], target, mode), 0.0, 1.0);
                row[k] = wk > 0.0 ? std::log(wk) : kMaskedLogit;
                row[k + 1] = wk < 1.0 ? std::log1p(-wk) : kMaskedLogit;
            }
        }
    }
    return v;
}

ColoringOutput predict_coloring_oracle(std::span<const Image> gt_textures) {
    if (gt_textures.empty()) {
        throw Error(ErrorCode::InvalidScene, "no ground-truth layers");
    }
    const int h = gt_textures.front().height();
    const int w = gt_textures.front().width();
    const int layers = static_cast<int>(gt_textures.size());
    ColoringOutput out = ColoringOutput::make(TextureScheme::RAW, h, w, layers);
    for (int j = 0; j < layers; ++j) {
        const Image &t = gt_textures[static_cast<std::size_t>(j)];
        if (t.height() != h || t.width() != w || t.channels() != 4) {
            throw Error(ErrorCode::SchemeShapeMismatch, "ground-truth textures must share an RGBA shape");
        }
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                for (int c = 0; c < 3; ++c) {
                    out.color(y, x, j, c) = t.at(y, x, c);
                }
                out.alpha(y, x, j) = std::clamp(t.at(y, x, 3), 0.0, 1.0);
            }
        }
    }
    return out;
}

ColoringOutput predict_coloring_passthrough(const Image &reference, const std::vector<WarpResult> &side_layers,
                                            double tau) {
    const int h = reference.height();
    const int w = reference.width();
    const int layers = static_cast<int>(side_layers.size());
    if (layers < 1) {
        throw Error(ErrorCode::InvalidScene, "no layers to colour");
    }
    ColoringOutput out = ColoringOutput::make(TextureScheme::RSBg, h, w, layers, WeightForm::Simplex);
    out.background = reference;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int j = 0; j < layers; ++j) {
                out.weight(y, x, j, 0) = 0.5;
                out.weight(y, x, j, 1) = 0.5;
                out.weight(y, x, j, 2) = 0.0;
                double a = 1.0;
                if (j + 1 < layers) {
                    const auto &s = side_layers[static_cast<std::size_t>(j)];
                    double diff = 0.0;
                    for (int c = 0; c < 3; ++c) {
                        diff += std::abs(s.image.at(y, x, c) - reference.at(y, x, c));
                    }
                    a = s.valid(y, x) ? std::exp(-diff / 3.0 / tau) : 0.0;
                }
                out.alpha(y, x, j) = a;
            }
        }
    }
    return out;
}

} // namespace lm
