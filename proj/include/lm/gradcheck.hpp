// Copyright Contributors to the layermesh project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "lm/aggregate.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lm {

/// Central finite-difference checks of every analytic gradient in the library.
struct GradcheckOptions {
    int configs = 100;  // evaluated configurations per suite
    double step = 1e-4; // central difference step
    std::uint64_t seed = 1;
    int coordinates = 6; // probed parameters per configuration (renderer suites)
};

struct GradcheckResult {
    std::string name;
    int configs = 0;          // configurations that contributed a comparison
    int probes = 0;           // individual finite differences taken
    int coverage_changed = 0; // probes skipped because a triangle or texel cell flipped
    double max_rel_error = 0.0;
    double tolerance = 0.0;

    bool passed() const noexcept { return configs > 0 && max_rel_error <= tolerance; }
};

/// |a - b| / max(|a|, |b|) in the Euclidean norm; absolute when both norms are below 1e-12.
double relative_error(std::span<const double> analytic, std::span<const double> numeric);

GradcheckResult check_aggregate(DepthScheme scheme, SoftAverage mode, const GradcheckOptions &opts);
GradcheckResult check_compose_over(const GradcheckOptions &opts);

enum class RenderParameter { Depth, Alpha, Color };
GradcheckResult check_render(RenderParameter param, const GradcheckOptions &opts);

GradcheckResult check_l1(const GradcheckOptions &opts);
GradcheckResult check_ordering(const GradcheckOptions &opts);
GradcheckResult check_tv(const GradcheckOptions &opts);

/// Every suite above.
std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions &opts);

} // namespace lm
