// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
#include "uvsplat/losses.hpp"

#include "uvsplat/attribute_maps.hpp"
#include "uvsplat/error.hpp"

#include <json.hpp>

#include <cmath>

namespace uvsplat {

void
LossWeights::validate() const {
    if (!(lambdaP >= 0.0 && lambdaS >= 0.0 && lambdaO >= 0.0 && lambdaUv >= 0.0))
        throw Error(ErrorKind::InvalidConfig, "loss weights must be non-negative");
}

double
meanSquare(std::span<const double> values) {
    if (values.empty())
        return 0.0;
    double acc = 0.0;
    for (double v : values)
        acc += v * v;
    return acc / double(values.size());
}

void
meanSquareGrad(std::span<const double> values, std::span<double> grad, double weight) {
    if (grad.size() != values.size())
        throw Error(ErrorKind::ShapeMismatch, "meanSquareGrad: size mismatch");
    const double k = 2.0 * weight / double(values.size());
    for (size_t i = 0; i < values.size(); ++i)
        grad[i] += k * values[i];
}

double
regOpacity(std::span<const double> opacities, double eps) {
    if (opacities.empty())
        return 0.0;
    double acc = 0.0;
    for (double o : opacities)
        acc += 0.5 * (std::log(o + eps) + std::log(1.0 - o + eps));
    return acc / double(opacities.size());
}

void
regOpacityGrad(std::span<const double> opacities, std::span<double> grad, double weight,
               double eps) {
    if (grad.size() != opacities.size())
        throw Error(ErrorKind::ShapeMismatch, "regOpacityGrad: size mismatch");
    const double k = 0.5 * weight / double(opacities.size());
    for (size_t i = 0; i < opacities.size(); ++i)
        grad[i] += k * (1.0 / (opacities[i] + eps) - 1.0 / (1.0 - opacities[i] + eps));
}

UnblendedUv
unblendUv(const Image &renderedUv, const Image &alpha, double epsAlpha) {
    if (renderedUv.channels != 3 || alpha.channels != 1 || renderedUv.width != alpha.width ||
        renderedUv.height != alpha.height)
        throw Error(ErrorKind::ShapeMismatch, "unblendUv expects H x W x 3 and H x W inputs");
    UnblendedUv out;
    out.uv = Image(renderedUv.width, renderedUv.height, 3);
    out.valid.assign(alpha.pixelCount(), 0);
    for (size_t p = 0; p < alpha.pixelCount(); ++p) {
        const double a = alpha.data[p];
        if (!(a >= epsAlpha))
            continue;
        out.valid[p] = 1;
        for (int c = 0; c < 3; ++c)
            out.uv.data[p * 3 + c] = (renderedUv.data[p * 3 + c] - (1.0 - a)) / a;
    }
    return out;
}

void
unblendUvBackward(const Image &renderedUv, const Image &alpha, const UnblendedUv &unblended,
                  const Image &gradUnblended, Image &gradUv, Image &gradAlpha) {
    if (!gradUnblended.sameShape(renderedUv) || !gradUv.sameShape(renderedUv) ||
        !gradAlpha.sameShape(alpha))
        throw Error(ErrorKind::ShapeMismatch, "unblendUvBackward: shape mismatch");
    for (size_t p = 0; p < alpha.pixelCount(); ++p) {
        if (!unblended.valid[p])
            continue;
        const double a = alpha.data[p];
        for (int c = 0; c < 3; ++c) {
            const double g = gradUnblended.data[p * 3 + c];
            gradUv.data[p * 3 + c] += g / a;
            // d/da [(R - 1 + a) / a] = (1 - R) / a^2
            gradAlpha.data[p] += g * (1.0 - renderedUv.data[p * 3 + c]) / (a * a);
        }
    }
}

namespace {

template <typename Fn>
size_t
forEachValidPair(const Image &img, std::span<const uint8_t> valid, Fn &&fn) {
    if (valid.size() != img.pixelCount())
        throw Error(ErrorKind::ShapeMismatch, "valid mask size differs from the image");
    size_t pairs = 0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const size_t p = size_t(y) * img.width + x;
            if (!valid[p])
                continue;
            if (x + 1 < img.width && valid[p + 1]) {
                fn(p, p + 1);
                ++pairs;
            }
            if (y + 1 < img.height && valid[p + img.width]) {
                fn(p, p + img.width);
                ++pairs;
            }
        }
    return pairs;
}

} // namespace

double
tvUv(const Image &unblended, std::span<const uint8_t> valid) {
    const int ch = unblended.channels;
    double acc = 0.0;
    const size_t pairs = forEachValidPair(unblended, valid, [&](size_t a, size_t b) {
        for (int c = 0; c < ch; ++c)
            acc += std::abs(unblended.data[a * ch + c] - unblended.data[b * ch + c]);
    });
    return pairs ? acc / double(pairs) : 0.0;
}

void
tvUvGrad(const Image &unblended, std::span<const uint8_t> valid, Image &grad, double weight) {
    if (!grad.sameShape(unblended))
        throw Error(ErrorKind::ShapeMismatch, "tvUvGrad: gradient shape mismatch");
    const int ch = unblended.channels;
    size_t pairs = forEachValidPair(unblended, valid, [](size_t, size_t) {});
    if (pairs == 0)
        return;
    const double k = weight / double(pairs);
    forEachValidPair(unblended, valid, [&](size_t a, size_t b) {
        for (int c = 0; c < ch; ++c) {
            const double d = unblended.data[a * ch + c] - unblended.data[b * ch + c];
            const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
            grad.data[a * ch + c] += k * s;
            grad.data[b * ch + c] -= k * s;
        }
    });
}

double
generatorAdvLoss(std::span<const double> scores) {
    if (scores.empty())
        return 0.0;
    double acc = 0.0;
    for (double s : scores)
        acc += softplus(-s);
    return acc / double(scores.size());
}

void
generatorAdvLossGrad(std::span<const double> scores, std::span<double> grad, double weight) {
    if (grad.size() != scores.size())
        throw Error(ErrorKind::ShapeMismatch, "generatorAdvLossGrad: size mismatch");
    const double k = weight / double(scores.size());
    for (size_t i = 0; i < scores.size(); ++i)
        grad[i] -= k * sigmoid(-scores[i]);
}

LossBreakdown
totalGeneratorLoss(double adv, double regPos, double regScale, double regOpac, double uvTv,
                   const LossWeights &weights) {
    weights.validate();
    LossBreakdown out{adv, regPos, regScale, regOpac, uvTv, 0.0};
    out.total = adv + weights.lambdaP * regPos + weights.lambdaS * regScale +
                weights.lambdaO * regOpac + weights.lambdaUv * uvTv;
    return out;
}

std::string
lossRecordJson(int64_t step, const LossBreakdown &loss) {
    nlohmann::json j;
    j["step"] = step;
    j["adv"] = loss.adv;
    j["reg_pos"] = loss.regPos;
    j["reg_scale"] = loss.regScale;
    j["reg_opac"] = loss.regOpac;
    j["uv_tv"] = loss.uvTv;
    j["total"] = loss.total;
    return j.dump();
}

} // namespace uvsplat
