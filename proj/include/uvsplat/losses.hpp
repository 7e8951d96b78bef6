// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
// Regularizers and loss aggregation for template-anchored Gaussian maps.
// Every loss has a matching gradient routine; gradients are *added* into the
// output buffer, scaled by `weight`.
#pragma once

#include "uvsplat/image.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace uvsplat {

struct LossWeights {
    double lambdaP = 0.1;
    double lambdaS = 0.05;
    double lambdaO = 1.0;
    double lambdaUv = 100.0;

    void validate() const;
};

struct LossBreakdown {
    double adv = 0.0;
    double regPos = 0.0;
    double regScale = 0.0;
    double regOpac = 0.0;
    double uvTv = 0.0;
    double total = 0.0;
};

/// Mean of squares; used for both the raw position-offset and raw scale maps.
double meanSquare(std::span<const double> values);
void meanSquareGrad(std::span<const double> values, std::span<double> grad, double weight = 1.0);

inline double regPosition(std::span<const double> rawOffsets) { return meanSquare(rawOffsets); }
inline double regScale(std::span<const double> rawScales) { return meanSquare(rawScales); }

inline constexpr double kOpacityRegEps = 1e-3;

/// Beta(0.5, 0.5) negative log-likelihood without its constant:
/// mean of 0.5 * (ln(o + eps) + ln(1 - o + eps)) over activated opacities.
double regOpacity(std::span<const double> opacities, double eps = kOpacityRegEps);
void regOpacityGrad(std::span<const double> opacities, std::span<double> grad, double weight = 1.0,
                    double eps = kOpacityRegEps);

inline constexpr double kUnblendMinAlpha = 0.05;

struct UnblendedUv {
    Image uv;                   // H x W x 3
    std::vector<uint8_t> valid; // H x W
};

/// Inverts compositing over a white background:
/// R' = (R_uv - (1 - alpha)) / alpha where alpha >= epsAlpha, invalid elsewhere.
UnblendedUv unblendUv(const Image &renderedUv, const Image &alpha,
                      double epsAlpha = kUnblendMinAlpha);
/// Adds the adjoint of unblendUv into gradUv (H x W x 3) and gradAlpha (H x W).
void unblendUvBackward(const Image &renderedUv, const Image &alpha, const UnblendedUv &unblended,
                       const Image &gradUnblended, Image &gradUv, Image &gradAlpha);

/// Anisotropic L1 total variation over 4-neighbour pairs with both pixels
/// valid, summed over channels and averaged over the pair count.
double tvUv(const Image &unblended, std::span<const uint8_t> valid);
void tvUvGrad(const Image &unblended, std::span<const uint8_t> valid, Image &grad,
              double weight = 1.0);

/// Non-saturating generator loss: mean softplus(-score).
double generatorAdvLoss(std::span<const double> scores);
void generatorAdvLossGrad(std::span<const double> scores, std::span<double> grad,
                          double weight = 1.0);

LossBreakdown totalGeneratorLoss(double adv, double regPos, double regScale, double regOpac,
                                 double uvTv, const LossWeights &weights);

/// {"step", "adv", "reg_pos", "reg_scale", "reg_opac", "uv_tv", "total"}
std::string lossRecordJson(int64_t step, const LossBreakdown &loss);

} // namespace uvsplat
