// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#include "lm/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lm {
namespace {

void require_beta_range(const BetaVolume &beta) {
    for (double v : beta.values) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw Error(ErrorCode::BetaOutOfRange, "value " + std::to_string(v) + " outside [0,1]");
        }
    }
}

void require_scheme(const BetaVolume &beta, DepthScheme want) {
    if (beta.scheme != want) {
        throw Error(ErrorCode::SchemeShapeMismatch,
                    std::string("expected ") + std::string(to_string(want)) + " volume, got " +
                        std::string(to_string(beta.scheme)));
    }
}

void require_groups(int planes, int layers) {
    if (layers < 1 || planes < 1 || planes % layers != 0) {
        throw Error(ErrorCode::IndivisibleGroups,
                    std::to_string(layers) + " layers do not divide " + std::to_string(planes) + " planes");
    }
}

double gc_group_depth(std::span<const double> beta, std::span<const double> depths, int first, int last) {
    double transmittance = 1.0;
    double acc = 0.0;
    for (int k = first; k < last; ++k) {
        acc += depths[k] * beta[k] * transmittance;
        transmittance *= 1.0 - beta[k];
    }
    acc += depths[last] * transmittance;
    // Convex combination; clamp away rounding so the group bounds hold exactly.
    return std::clamp(acc, depths[first], depths[last]);
}

// Softmax of logits into w; returns nothing, w sums to one.
void softmax(std::span<const double> logits, std::span<double> w) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        w[k] = std::exp(logits[k] - mx);
        sum += w[k];
    }
    for (double &v : w) {
        v /= sum;
    }
}

double sa_depth(std::span<const double> w, std::span<const double> depths, SoftAverage mode) {
    double acc = 0.0;
    if (mode == SoftAverage::Linear) {
        for (std::size_t k = 0; k < w.size(); ++k) {
            acc += w[k] * depths[k];
        }
    } else {
        for (std::size_t k = 0; k < w.size(); ++k) {
            acc += w[k] / depths[k];
        }
        acc = 1.0 / acc;
    }
    return std::clamp(acc, depths.front(), depths.back());
}

} // namespace

std::string_view to_string(DepthScheme s) {
    switch (s) {
    case DepthScheme::GC: return "GC";
    case DepthScheme::SA: return "SA";
    case DepthScheme::BI: return "BI";
    }
    return "?";
}

DepthScheme parse_depth_scheme(std::string_view s) {
    if (s == "gc" || s == "GC") return DepthScheme::GC;
    if (s == "sa" || s == "SA") return DepthScheme::SA;
    if (s == "bi" || s == "BI") return DepthScheme::BI;
    throw Error(ErrorCode::InvalidConfig, "unknown depth scheme '" + std::string(s) + "'");
}

BetaVolume BetaVolume::gc(int h, int w, int planes, double fill) {
    BetaVolume b{DepthScheme::GC, h, w, 0, planes, {}};
    b.values.assign(static_cast<std::size_t>(h) * w * planes, fill);
    return b;
}

BetaVolume BetaVolume::sa(int h, int w, int layers, int planes, double fill) {
    BetaVolume b{DepthScheme::SA, h, w, layers, planes, {}};
    b.values.assign(static_cast<std::size_t>(h) * w * layers * planes, fill);
    return b;
}

BetaVolume BetaVolume::bi(int h, int w, int layers, double fill) {
    BetaVolume b{DepthScheme::BI, h, w, layers, 0, {}};
    b.values.assign(static_cast<std::size_t>(h) * w * layers, fill);
    return b;
}

int BetaVolume::channels() const noexcept {
    switch (scheme) {
    case DepthScheme::GC: return planes;
    case DepthScheme::SA: return layers * planes;
    case DepthScheme::BI: return layers;
    }
    return 0;
}

void BetaVolume::validate() const {
    if (height < 1 || width < 1 || channels() < 1 ||
        values.size() != static_cast<std::size_t>(height) * width * channels()) {
        throw Error(ErrorCode::SchemeShapeMismatch, "beta volume size does not match its scheme");
    }
    if (scheme == DepthScheme::SA) {
        for (double v : values) {
            if (!std::isfinite(v)) {
                throw Error(ErrorCode::BetaOutOfRange, "non-finite logit");
            }
        }
    } else {
        require_beta_range(*this);
    }
}

std::pair<int, int> group_bounds(int planes, int layers, int j) {
    require_groups(planes, layers);
    if (j < 1 || j > layers) {
        throw Error(ErrorCode::IndivisibleGroups, "group index " + std::to_string(j) + " out of range");
    }
    const int size = planes / layers;
    return {1 + (j - 1) * size, j * size};
}

namespace detail {
void gc_group_weights(std::span<const double> beta, int first, int last, std::span<double> weights) {
    double transmittance = 1.0;
    for (int k = first; k < last; ++k) {
        weights[k] = beta[k] * transmittance;
        transmittance *= 1.0 - beta[k];
    }
    weights[last] = transmittance;
}
} // namespace detail

std::vector<double> gc_weights(std::span<const double> beta, int planes, int layers) {
    require_groups(planes, layers);
    std::vector<double> w(static_cast<std::size_t>(planes));
    const int size = planes / layers;
    for (int j = 0; j < layers; ++j) {
        detail::gc_group_weights(beta, j * size, (j + 1) * size - 1, w);
    }
    return w;
}

DepthLayerSet aggregate_gc(const BetaVolume &beta, const PlaneStack &planes, int layers) {
    require_scheme(beta, DepthScheme::GC);
    const int p = static_cast<int>(planes.size());
    require_groups(p, layers);
    if (beta.planes != p) {
        throw Error(ErrorCode::SchemeShapeMismatch, "GC volume plane count differs from the plane stack");
    }
    beta.validate();
    const int size = p / layers;
    DepthLayerSet out(layers, beta.height, beta.width, DepthScheme::GC);
    for (int y = 0; y < beta.height; ++y) {
        for (int x = 0; x < beta.width; ++x) {
            const auto b = beta.pixel(y, x);
            for (int j = 0; j < layers; ++j) {
                out.at(j, y, x) = gc_group_depth(b, planes.depths(), j * size, (j + 1) * size - 1);
            }
        }
    }
    return out;
}

DepthLayerSet aggregate_sa(const BetaVolume &logits, const PlaneStack &planes, SoftAverage mode) {
    require_scheme(logits, DepthScheme::SA);
    const int p = static_cast<int>(planes.size());
    if (logits.planes != p) {
        throw Error(ErrorCode::SchemeShapeMismatch, "SA volume plane count differs from the plane stack");
    }
    logits.validate();
    DepthLayerSet out(logits.layers, logits.height, logits.width, DepthScheme::SA);
    std::vector<double> w(static_cast<std::size_t>(p));
    for (int y = 0; y < logits.height; ++y) {
        for (int x = 0; x < logits.width; ++x) {
            const auto l = logits.pixel(y, x);
            for (int j = 0; j < logits.layers; ++j) {
                softmax(l.subspan(static_cast<std::size_t>(j) * p, static_cast<std::size_t>(p)), w);
                out.at(j, y, x) = sa_depth(w, planes.depths(), mode);
            }
        }
    }
    return out;
}

DepthLayerSet aggregate_bi(const BetaVolume &beta, const PlaneStack &planes) {
    require_scheme(beta, DepthScheme::BI);
    beta.validate();
    const double d1 = planes.nearest();
    const double dp = planes.farthest();
    DepthLayerSet out(beta.layers, beta.height, beta.width, DepthScheme::BI);
    for (int y = 0; y < beta.height; ++y) {
        for (int x = 0; x < beta.width; ++x) {
            const auto b = beta.pixel(y, x);
            for (int j = 0; j < beta.layers; ++j) {
                out.at(j, y, x) = std::clamp(b[j] * d1 + (1.0 - b[j]) * dp, d1, dp);
            }
        }
    }
    return out;
}

DepthLayerSet aggregate(const BetaVolume &beta, const PlaneStack &planes, int layers, SoftAverage mode) {
    switch (beta.scheme) {
    case DepthScheme::GC: return aggregate_gc(beta, planes, layers);
    case DepthScheme::SA: return aggregate_sa(beta, planes, mode);
    case DepthScheme::BI: return aggregate_bi(beta, planes);
    }
    throw Error(ErrorCode::SchemeShapeMismatch, "unknown scheme");
}

Eigen::MatrixXd aggregate_jacobian(const BetaVolume &beta, const PlaneStack &planes, int layers, int y, int x,
                                   SoftAverage mode) {
    const auto d = planes.depths();
    const int p = static_cast<int>(planes.size());
    const auto b = beta.pixel(y, x);
    switch (beta.scheme) {
    case DepthScheme::GC: {
        require_groups(p, layers);
        require_beta_range(beta);
        const int size = p / layers;
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(layers, p);
        for (int j = 0; j < layers; ++j) {
            const int first = j * size;
            const int last = first + size - 1;
            // rest[k]: composite of planes k..last; rest[last] = d_last since its opacity is forced.
            std::vector<double> rest(static_cast<std::size_t>(size) + 1);
            rest[size - 1] = d[last];
            for (int k = last - 1; k >= first; --k) {
                rest[k - first] = b[k] * d[k] + (1.0 - b[k]) * rest[k - first + 1];
            }
            double transmittance = 1.0;
            for (int k = first; k < last; ++k) {
                jac(j, k) = transmittance * (d[k] - rest[k - first + 1]);
                transmittance *= 1.0 - b[k];
            }
        }
        return jac;
    }
    case DepthScheme::SA: {
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(beta.layers, static_cast<Eigen::Index>(beta.layers) * p);
        std::vector<double> w(static_cast<std::size_t>(p));
        for (int j = 0; j < beta.layers; ++j) {
            softmax(b.subspan(static_cast<std::size_t>(j) * p, static_cast<std::size_t>(p)), w);
            if (mode == SoftAverage::Linear) {
                double mean = 0.0;
                for (int k = 0; k < p; ++k) mean += w[k] * d[k];
                for (int k = 0; k < p; ++k) jac(j, j * p + k) = w[k] * (d[k] - mean);
            } else {
                double inv = 0.0;
                for (int k = 0; k < p; ++k) inv += w[k] / d[k];
                const double depth = 1.0 / inv;
                for (int k = 0; k < p; ++k) jac(j, j * p + k) = -depth * depth * w[k] * (1.0 / d[k] - inv);
            }
        }
        return jac;
    }
    case DepthScheme::BI: {
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(beta.layers, beta.layers);
        jac.diagonal().setConstant(planes.nearest() - planes.farthest());
        return jac;
    }
    }
    throw Error(ErrorCode::SchemeShapeMismatch, "unknown scheme");
}

BetaVolume aggregate_vjp(const BetaVolume &beta, const PlaneStack &planes, int layers,
                         const DepthLayerSet &upstream, SoftAverage mode) {
    const int out_layers = beta.scheme == DepthScheme::GC ? layers : beta.layers;
    if (upstream.layers != out_layers || upstream.height != beta.height || upstream.width != beta.width) {
        throw Error(ErrorCode::ShapeMismatch, "upstream gradient shape differs from the layer set");
    }
    BetaVolume grad = beta;
    std::fill(grad.values.begin(), grad.values.end(), 0.0);
    Eigen::VectorXd up(out_layers);
    for (int y = 0; y < beta.height; ++y) {
        for (int x = 0; x < beta.width; ++x) {
            const Eigen::MatrixXd jac = aggregate_jacobian(beta, planes, layers, y, x, mode);
            for (int j = 0; j < out_layers; ++j) up[j] = upstream.at(j, y, x);
            const Eigen::VectorXd g = jac.transpose() * up;
            auto dst = grad.pixel(y, x);
            for (Eigen::Index c = 0; c < g.size(); ++c) dst[c] = g[c];
        }
    }
    return grad;
}

} // namespace lm
