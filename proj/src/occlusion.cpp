// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#include "lm/occlusion.hpp"

#include "lm/image_io.hpp"

#include <cmath>

namespace lm {

FlowField coordinate_grid(int height, int width) {
    FlowField g(height, width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            g.set(y, x, Vec2(x, y));
        }
    }
    return g;
}

WarpResult backward_warp(const Image &src, const FlowField &flow) {
    WarpResult out{Image(flow.height, flow.width, src.channels()), Mask(flow.height, flow.width, false)};
    for (int y = 0; y < flow.height; ++y) {
        for (int x = 0; x < flow.width; ++x) {
            if (flow.valid(y, x)) {
                out.valid.set(y, x, bilinear_sample(src, flow.at(y, x), out.image.pixel(y, x)));
            }
        }
    }
    return out;
}

FlowField backward_warp(const FlowField &src, const FlowField &flow) {
    FlowField out(flow.height, flow.width, src.direction);
    for (int y = 0; y < flow.height; ++y) {
        for (int x = 0; x < flow.width; ++x) {
            out.valid.set(y, x, false);
            if (!flow.valid(y, x)) {
                continue;
            }
            const auto f = bilinear_footprint(flow.at(y, x), src.width, src.height);
            if (!f.valid || !src.valid(f.y0, f.x0) || !src.valid(f.y0, f.x1) || !src.valid(f.y1, f.x0) ||
                !src.valid(f.y1, f.x1)) {
                continue;
            }
            bilinear_sample(src.coords, flow.at(y, x), out.coords.pixel(y, x));
            out.valid.set(y, x, true);
        }
    }
    return out;
}

Image to_offsets(const FlowField &flow) {
    Image off(flow.height, flow.width, 2);
    for (int y = 0; y < flow.height; ++y) {
        for (int x = 0; x < flow.width; ++x) {
            off.at(y, x, 0) = flow.coords.at(y, x, 0) - x;
            off.at(y, x, 1) = flow.coords.at(y, x, 1) - y;
        }
    }
    return off;
}

FlowField from_offsets(const Image &offsets, FlowDirection dir) {
    if (offsets.channels() != 2) {
        throw Error(ErrorCode::ShapeMismatch, "offset flow needs two channels");
    }
    FlowField flow(offsets.height(), offsets.width(), dir);
    for (int y = 0; y < flow.height; ++y) {
        for (int x = 0; x < flow.width; ++x) {
            flow.set(y, x, Vec2(x + offsets.at(y, x, 0), y + offsets.at(y, x, 1)));
            flow.valid.set(y, x, std::isfinite(offsets.at(y, x, 0)) && std::isfinite(offsets.at(y, x, 1)));
        }
    }
    return flow;
}

CycleResidual cycle_residual(const FlowField &f_rn, const FlowField &f_nr) {
    if (f_rn.direction != FlowDirection::Backward || f_nr.direction != FlowDirection::Backward) {
        throw Error(ErrorCode::ConventionMismatch, "cycle residual needs two backward flows");
    }
    if (f_rn.height != f_nr.height || f_rn.width != f_nr.width) {
        throw Error(ErrorCode::ShapeMismatch, "cycle residual needs flows of the same size");
    }
    const FlowField g = backward_warp(f_rn, f_nr);
    CycleResidual out{Image(f_nr.height, f_nr.width, 1), g.valid};
    for (int y = 0; y < g.height; ++y) {
        for (int x = 0; x < g.width; ++x) {
            if (g.valid(y, x)) {
                out.residual.at(y, x) = (g.at(y, x) - Vec2(x, y)).norm();
            }
        }
    }
    return out;
}

OcclusionMask occlusion_mask(const FlowField &f_rn, const FlowField &f_nr, double epsilon, int crop) {
    if (crop < 0 || 2 * crop >= std::min(f_nr.height, f_nr.width)) {
        throw Error(ErrorCode::CropTooLarge, "crop margin " + std::to_string(crop) + " leaves no pixels");
    }
    const CycleResidual res = cycle_residual(f_rn, f_nr);
    OcclusionMask out;
    out.mask = Mask(f_nr.height, f_nr.width, false);
    out.epsilon = epsilon;
    out.crop = crop;
    for (int y = crop; y < f_nr.height - crop; ++y) {
        for (int x = crop; x < f_nr.width - crop; ++x) {
            ++out.crop_pixels;
            const bool occluded = !res.valid(y, x) || !(res.residual.at(y, x) < epsilon);
            if (occluded) {
                out.mask.set(y, x, true);
                ++out.occluded;
            }
        }
    }
    return out;
}

void write_flow_pfm(const std::filesystem::path &path, const FlowField &flow) {
    Image img(flow.height, flow.width, 3);
    for (int y = 0; y < flow.height; ++y) {
        for (int x = 0; x < flow.width; ++x) {
            img.at(y, x, 0) = flow.coords.at(y, x, 0);
            img.at(y, x, 1) = flow.coords.at(y, x, 1);
            img.at(y, x, 2) = flow.valid(y, x) ? 1.0 : 0.0;
        }
    }
    io::write_pfm(path, img);
}

FlowField read_flow_pfm(const std::filesystem::path &path, FlowDirection dir) {
    const Image img = io::read_pfm(path);
    if (img.channels() != 3) {
        throw Error(ErrorCode::FormatError, path.string() + ": flow PFM must have three channels (x, y, valid)");
    }
    FlowField flow(img.height(), img.width(), dir);
    for (int y = 0; y < flow.height; ++y) {
        for (int x = 0; x < flow.width; ++x) {
            flow.set(y, x, Vec2(img.at(y, x, 0), img.at(y, x, 1)));
            flow.valid.set(y, x, img.at(y, x, 2) > 0.5 && std::isfinite(img.at(y, x, 0)) &&
                                     std::isfinite(img.at(y, x, 1)));
        }
    }
    return flow;
}

} // namespace lm
