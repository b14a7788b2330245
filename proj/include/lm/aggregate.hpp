// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "lm/core.hpp"
#include "lm/psv.hpp"

#include <Eigen/Core>

#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace lm {

/// Layer-depth encodings: group compositing, soft aggregation, bounds interpolation.
enum class DepthScheme { GC, SA, BI };

std::string_view to_string(DepthScheme s);
DepthScheme parse_depth_scheme(std::string_view s);

/// How soft aggregation averages plane depths.
enum class SoftAverage { Linear, InverseDepth };

/// Raw geometry-predictor output, h x w pixels with `channels()` values each.
///   GC: P opacities in [0,1]
///   SA: L x P unconstrained logits, layer-major within a pixel
///   BI: L blend weights in [0,1]
struct BetaVolume {
    DepthScheme scheme = DepthScheme::BI;
    int height = 0;
    int width = 0;
    int layers = 0; // unused for GC
    int planes = 0; // unused for BI
    std::vector<double> values;

    static BetaVolume gc(int h, int w, int planes, double fill = 0.0);
    static BetaVolume sa(int h, int w, int layers, int planes, double fill = 0.0);
    static BetaVolume bi(int h, int w, int layers, double fill = 0.0);

    int channels() const noexcept;
    std::span<double> pixel(int y, int x) noexcept {
        return {values.data() + (static_cast<std::size_t>(y) * width + x) * channels(),
                static_cast<std::size_t>(channels())};
    }
    std::span<const double> pixel(int y, int x) const noexcept {
        return {values.data() + (static_cast<std::size_t>(y) * width + x) * channels(),
                static_cast<std::size_t>(channels())};
    }
    /// Throws SchemeShapeMismatch or BetaOutOfRange.
    void validate() const;
};

/// L depth grids of size h x w, stored layer-major then row-major.
struct DepthLayerSet {
    int layers = 0;
    int height = 0;
    int width = 0;
    DepthScheme provenance = DepthScheme::BI;
    std::vector<double> depths;

    DepthLayerSet() = default;
    DepthLayerSet(int l, int h, int w, DepthScheme tag, double fill = 0.0)
        : layers(l), height(h), width(w), provenance(tag),
          depths(static_cast<std::size_t>(l) * h * w, fill) {}

    std::size_t index(int layer, int y, int x) const noexcept {
        return (static_cast<std::size_t>(layer) * height + y) * width + x;
    }
    double &at(int layer, int y, int x) noexcept { return depths[index(layer, y, x)]; }
    double at(int layer, int y, int x) const noexcept { return depths[index(layer, y, x)]; }
    std::span<const double> layer(int j) const noexcept {
        return {depths.data() + index(j, 0, 0), static_cast<std::size_t>(height) * width};
    }
};

/// 1-based inclusive plane indices bounding group j (1..L).
std::pair<int, int> group_bounds(int planes, int layers, int j);

/// Over-composites each group's plane depths with the group's last opacity forced to 1.
DepthLayerSet aggregate_gc(const BetaVolume &beta, const PlaneStack &planes, int layers);
/// Softmax over the P logits of each layer, then a weighted average of all plane depths.
DepthLayerSet aggregate_sa(const BetaVolume &logits, const PlaneStack &planes,
                           SoftAverage mode = SoftAverage::Linear);
/// d = beta * d_1 + (1 - beta) * d_P.
DepthLayerSet aggregate_bi(const BetaVolume &beta, const PlaneStack &planes);

/// Dispatches on beta.scheme. `layers` is only read for GC.
DepthLayerSet aggregate(const BetaVolume &beta, const PlaneStack &planes, int layers,
                        SoftAverage mode = SoftAverage::Linear);

namespace detail {
/// Compositing weights of one group (first..last, 0-based inclusive) with the last opacity forced to 1.
void gc_group_weights(std::span<const double> beta, int first, int last, std::span<double> weights);
} // namespace detail

/// Per-group compositing weights at one pixel, P entries; each group sums to 1.
std::vector<double> gc_weights(std::span<const double> beta, int planes, int layers);

/// Dense per-pixel Jacobian d(depth_j)/d(beta_c): L rows, beta.channels() columns.
Eigen::MatrixXd aggregate_jacobian(const BetaVolume &beta, const PlaneStack &planes, int layers, int y, int x,
                                   SoftAverage mode = SoftAverage::Linear);

/// Vector-Jacobian product: given dLoss/d(depths), returns dLoss/d(beta) shaped like beta.
BetaVolume aggregate_vjp(const BetaVolume &beta, const PlaneStack &planes, int layers,
                         const DepthLayerSet &upstream, SoftAverage mode = SoftAverage::Linear);

} // namespace lm
