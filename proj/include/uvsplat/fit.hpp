// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
// Inverse-rendering fitter: optimizes raw attribute maps with Adam against
// posed target images, with staged regularizers and progressive UV density.
#pragma once

#include "uvsplat/adam.hpp"
#include "uvsplat/attribute_maps.hpp"
#include "uvsplat/camera.hpp"
#include "uvsplat/image.hpp"
#include "uvsplat/losses.hpp"
#include "uvsplat/mesh.hpp"
#include "uvsplat/render.hpp"

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace uvsplat {

struct TargetView {
    Camera camera;
    Image image; // H x W x 3 in [0,1]
};

struct TargetSet {
    std::vector<TargetView> views;
    Vec3 background{1.0, 1.0, 1.0};

    void validate() const;
};

struct FitConfig {
    AdamParams adam;
    int iterations = 2000;
    LossWeights weights;
    /// Iteration at which the opacity and UV-TV terms switch on. Unset means
    /// "at the first growth event" (never, without a grow schedule).
    std::optional<int> uvTvEnabledFrom;
    std::vector<std::pair<int, int>> growSchedule; // (iteration, uv resolution)
    double photometricWeight = 1.0;
    uint64_t seed = 0;
    double initNoise = 0.0; // stddev of Gaussian noise added to zero-initialized maps
    int mapResolution = 64;
    int uvResolution = 64;
    double unblendMinAlpha = kUnblendMinAlpha;
    RenderOptions render;

    void validate() const;
    int stagedStart() const;
};

/// Knobs for one objective evaluation.
struct ObjectiveSettings {
    LossWeights weights;
    double photometricWeight = 1.0;
    bool opacityRegEnabled = true;
    bool uvTvEnabled = true;
    double unblendMinAlpha = kUnblendMinAlpha;
    RenderOptions render;
};

struct ObjectiveResult {
    LossBreakdown loss;       // adv holds the weighted photometric term
    double photometricMse = 0.0;
    double psnr = 0.0;
    AttributeMaps gradient;   // same shape as the maps; empty if not requested
};

/// Loss = w_photo * MSE(render, target) + lambda_p * regPos + lambda_s * regScale
///        + lambda_o * regOpac + lambda_uv * mean over views of TV(unblend(R_uv)).
ObjectiveResult evaluateObjective(const AttributeMaps &maps, const UvGrid &grid,
                                  const TargetSet &targets, const ActivationConfig &act,
                                  const ObjectiveSettings &settings, bool withGradient);

struct FitRecord {
    int64_t step = 0;
    LossBreakdown loss;
    double psnr = 0.0;
    size_t gaussianCount = 0;
};

struct FitResult {
    AttributeMaps maps;
    AdamState optimizer;
    UvGrid grid;
    std::vector<FitRecord> history;
};

using FitObserver = std::function<void(const FitRecord &)>;

/// Throws EmptyTargets, InvalidConfig, or NonFiniteLoss (naming the first
/// non-finite quantity). Without `init` the maps start at zero.
FitResult fitMaps(const TargetSet &targets, const UvChartIndex &index, const ActivationConfig &act,
                  const FitConfig &cfg, std::optional<AttributeMaps> init = std::nullopt,
                  const FitObserver &observer = {});

/// Re-samples the same charts at a higher resolution; the maps are untouched.
UvGrid growDensity(const UvChartIndex &index, const UvGrid &grid, int newResolution);

/// JSON round trip for FitConfig. Parse errors name the offending field.
FitConfig fitConfigFromJson(const std::string &text);
std::string fitHistoryJson(const std::vector<FitRecord> &history);

} // namespace uvsplat
