// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "lm/aggregate.hpp"
#include "lm/core.hpp"

#include <vector>

namespace lm {

/// Loss value plus its gradient, laid out like the (first) input.
struct LossReport {
    double value = 0.0;
    std::vector<double> gradient;
};

/// Training-loss weights; perceptual and adversarial terms are not implemented.
struct LossWeights {
    double l1 = 1.0;
    double tv = 5.0;
    double ordering = 2.0;
};

/// Mean |a - b|; gradient w.r.t. a is sign(a - b) / n. Throws ShapeMismatch.
LossReport l1_loss(const Image &a, const Image &b);

/// Mean over pixels of sum_j max(0, d_j - d_{j+1}). Throws SingleLayer.
LossReport ordering_loss(const DepthLayerSet &depths);

/// Anisotropic L1 total variation summed over layers, divided by h*w. Throws DegenerateGrid.
LossReport tv_loss(const DepthLayerSet &depths);

/// Weighted regulariser sum (L1 image term excluded, it needs images).
LossReport depth_regularizers(const DepthLayerSet &depths, const LossWeights &weights = {});

inline constexpr double kPsnrCeiling = 99.0;

/// 10 log10(peak^2 / MSE), kPsnrCeiling when the images are identical. Throws ShapeMismatch.
double psnr(const Image &a, const Image &b, double peak = 1.0);

/// Mean SSIM over all valid 11x11 Gaussian windows (sigma 1.5), averaged
/// over channels. Throws ShapeMismatch or ImageTooSmall.
double ssim(const Image &a, const Image &b, double peak = 1.0);

/// Removes `margin` pixels on every side. Throws CropTooLarge.
Image central_crop(const Image &img, int margin);

} // namespace lm
