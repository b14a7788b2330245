// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#include "lm/losses.hpp"

#include <array>
#include <cmath>
#include <string>

namespace lm {
namespace {

void require_same(const Image &a, const Image &b) {
    if (!a.same_shape(b)) {
        throw Error(ErrorCode::ShapeMismatch, "images differ in shape");
    }
}

constexpr int kWin = 11;
constexpr double kSigma = 1.5;

std::array<double, kWin> gaussian_taps() {
    std::array<double, kWin> g{};
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - kWin / 2;
        g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        sum += g[i];
    }
    for (double &v : g) {
        v /= sum;
    }
    return g;
}

// Separable valid-mode filter of a single-channel h x w buffer.
std::vector<double> filter_valid(const std::vector<double> &in, int h, int w, const std::array<double, kWin> &g) {
    const int ow = w - kWin + 1;
    const int oh = h - kWin + 1;
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < kWin; ++i) {
                s += g[i] * in[static_cast<std::size_t>(y) * w + x + i];
            }
            tmp[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < kWin; ++i) {
                s += g[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
            }
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    return out;
}

} // namespace

LossReport l1_loss(const Image &a, const Image &b) {
    require_same(a, b);
    LossReport r;
    const std::size_t n = a.data().size();
    r.gradient.assign(n, 0.0);
    if (n == 0) {
        return r;
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a.data()[i] - b.data()[i];
        r.value += std::abs(d);
        r.gradient[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
    }
    r.value *= inv;
    return r;
}

LossReport ordering_loss(const DepthLayerSet &depths) {
    if (depths.layers < 2) {
        throw Error(ErrorCode::SingleLayer, "ordering loss needs at least two layers");
    }
    LossReport r;
    r.gradient.assign(depths.depths.size(), 0.0);
    const std::size_t pixels = static_cast<std::size_t>(depths.height) * depths.width;
    const double inv = 1.0 / static_cast<double>(pixels);
    for (int j = 0; j + 1 < depths.layers; ++j) {
        const std::size_t a = depths.index(j, 0, 0);
        const std::size_t b = depths.index(j + 1, 0, 0);
        for (std::size_t p = 0; p < pixels; ++p) {
            const double d = depths.depths[a + p] - depths.depths[b + p];
            if (d > 0.0) {
                r.value += d;
                r.gradient[a + p] += inv;
                r.gradient[b + p] -= inv;
            }
        }
    }
    r.value *= inv;
    return r;
}

LossReport tv_loss(const DepthLayerSet &depths) {
    if (depths.height < 2 || depths.width < 2) {
        throw Error(ErrorCode::DegenerateGrid, "total variation needs at least a 2x2 grid");
    }
    LossReport r;
    r.gradient.assign(depths.depths.size(), 0.0);
    const double inv = 1.0 / (static_cast<double>(depths.height) * depths.width);
    const auto edge = [&](std::size_t i0, std::size_t i1) {
        const double d = depths.depths[i1] - depths.depths[i0];
        r.value += std::abs(d);
        const double s = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
        r.gradient[i1] += s;
        r.gradient[i0] -= s;
    };
    for (int j = 0; j < depths.layers; ++j) {
        for (int y = 0; y < depths.height; ++y) {
            for (int x = 0; x < depths.width; ++x) {
                if (y + 1 < depths.height) edge(depths.index(j, y, x), depths.index(j, y + 1, x));
                if (x + 1 < depths.width) edge(depths.index(j, y, x), depths.index(j, y, x + 1));
            }
        }
    }
    r.value *= inv;
    return r;
}

LossReport depth_regularizers(const DepthLayerSet &depths, const LossWeights &weights) {
    LossReport out = tv_loss(depths);
    out.value *= weights.tv;
    for (double &g : out.gradient) {
        g *= weights.tv;
    }
    if (depths.layers >= 2) {
        const LossReport ord = ordering_loss(depths);
        out.value += weights.ordering * ord.value;
        for (std::size_t i = 0; i < out.gradient.size(); ++i) {
            out.gradient[i] += weights.ordering * ord.gradient[i];
        }
    }
    return out;
}

double psnr(const Image &a, const Image &b, double peak) {
    require_same(a, b);
    double se = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.data().size());
    if (mse == 0.0) {
        return kPsnrCeiling;
    }
    return std::min(kPsnrCeiling, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const Image &a, const Image &b, double peak) {
    require_same(a, b);
    const int h = a.height();
    const int w = a.width();
    if (h < kWin || w < kWin) {
        throw Error(ErrorCode::ImageTooSmall, "SSIM needs images of at least 11x11 pixels");
    }
    const auto g = gaussian_taps();
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    const std::size_t n = static_cast<std::size_t>(h) * w;
    double total = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = a.data()[i * a.channels() + c];
            y[i] = b.data()[i * b.channels() + c];
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const auto mx = filter_valid(x, h, w, g);
        const auto my = filter_valid(y, h, w, g);
        const auto mxx = filter_valid(xx, h, w, g);
        const auto myy = filter_valid(yy, h, w, g);
        const auto mxy = filter_valid(xy, h, w, g);
        double sum = 0.0;
        for (std::size_t i = 0; i < mx.size(); ++i) {
            const double vx = mxx[i] - mx[i] * mx[i];
            const double vy = myy[i] - my[i] * my[i];
            const double cov = mxy[i] - mx[i] * my[i];
            sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
                   ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
        }
        total += sum / static_cast<double>(mx.size());
    }
    return total / a.channels();
}

Image central_crop(const Image &img, int margin) {
    if (margin < 0 || 2 * margin >= std::min(img.height(), img.width())) {
        throw Error(ErrorCode::CropTooLarge, "crop margin " + std::to_string(margin) + " is too large");
    }
    Image out(img.height() - 2 * margin, img.width() - 2 * margin, img.channels());
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            for (int c = 0; c < img.channels(); ++c) {
                out.at(y, x, c) = img.at(y + margin, x + margin, c);
            }
        }
    }
    return out;
}

} // namespace lm
