// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
// Raw 14-channel UV attribute maps, bilinear lookup, and the activations that
// turn raw samples into valid Gaussian parameters.
#pragma once

#include "uvsplat/math.hpp"
#include "uvsplat/mesh.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace uvsplat {

namespace channel {
inline constexpr int kPosition = 0; // 3
inline constexpr int kScale = 3;    // 3
inline constexpr int kRotation = 6; // 4
inline constexpr int kColor = 10;   // 3
inline constexpr int kOpacity = 13; // 1
inline constexpr int kCount = 14;
} // namespace channel

using RawSample = std::array<double, channel::kCount>;

/// H x W x 14 raw values, row-major, channel-last. Row j covers v in
/// [j/H, (j+1)/H), column i covers u in [i/W, (i+1)/W).
class AttributeMaps {
  public:
    AttributeMaps() = default;
    AttributeMaps(int height, int width, double fill = 0.0);

    int height() const { return mHeight; }
    int width() const { return mWidth; }
    size_t texelCount() const { return size_t(mHeight) * mWidth; }
    size_t size() const { return mData.size(); }

    double &at(int row, int col, int ch) { return mData[index(row, col, ch)]; }
    double at(int row, int col, int ch) const { return mData[index(row, col, ch)]; }
    size_t index(int row, int col, int ch) const {
        return (size_t(row) * mWidth + col) * channel::kCount + ch;
    }

    std::span<double> data() { return mData; }
    std::span<const double> data() const { return mData; }

    /// Values of channels [first, first + count) for every texel, texel-major.
    std::vector<double> gatherChannels(int first, int count) const;

    bool allFinite() const;
    bool sameShape(const AttributeMaps &other) const {
        return mHeight == other.mHeight && mWidth == other.mWidth;
    }

  private:
    int mHeight = 0;
    int mWidth = 0;
    std::vector<double> mData;
};

struct ActivationConfig {
    double gammaPos = 0.25; // meters
    double sMax = 3.0;
    double sInit = 5.0;

    void validate() const;
};

struct Gaussian {
    Vec3 position;
    Vec3 scale;
    Quat rotation;
    Vec3 color;
    double opacity = 0.5;
    Vec2 uv;
    Vec3 anchor;
};

struct GaussianSet {
    std::vector<Gaussian> gaussians;

    size_t size() const { return gaussians.size(); }
    bool empty() const { return gaussians.empty(); }
};

/// Partials of a scalar loss w.r.t. the activated attributes of one Gaussian.
struct GaussianGrad {
    Vec3 position;
    Vec3 scale;
    Quat rotation{0.0, 0.0, 0.0, 0.0};
    Vec3 color;
    double opacity = 0.0;
};

using SplatGradients = std::vector<GaussianGrad>;

// Bilinear lookup ---------------------------------------------------------

/// Four texel taps and weights of a bilinear sample.
struct BilinearTaps {
    std::array<uint32_t, 4> texel{};
    std::array<double, 4> weight{};
};

/// Texel centres at ((i + 0.5) / W, (j + 0.5) / H), clamped to the edge
/// outside the outermost centres. Throws CoordOutOfDomain outside [0,1]^2.
BilinearTaps bilinearTaps(int height, int width, const Vec2 &uv);

std::vector<RawSample> gridSample(const AttributeMaps &maps, std::span<const Vec2> coords);

/// Adjoint of gridSample: scatters per-sample gradients into `mapGrad`.
void gridSampleBackward(std::span<const Vec2> coords, std::span<const RawSample> sampleGrad,
                        AttributeMaps &mapGrad);

// Activations -------------------------------------------------------------

inline double
softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double
sigmoid(double x) {
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// mu = anchor + gammaPos * tanh(raw).
Vec3 activatePosition(const Vec3 &raw, const Vec3 &anchor, const ActivationConfig &cfg);
Vec3 activatePositionGrad(const Vec3 &raw, const Vec3 &gradOut, const ActivationConfig &cfg);

/// s = exp(-sMax - softplus(-(raw - sInit) - sMax)), per component, floored at
/// the smallest normal double so the result stays positive.
double activateScale(double raw, const ActivationConfig &cfg);
double activateScaleDerivative(double raw, const ActivationConfig &cfg);
Vec3 activateScale(const Vec3 &raw, const ActivationConfig &cfg);

/// L2 normalization; a zero vector maps to the identity rotation.
Quat activateRotation(const Quat &raw);
Quat activateRotationGrad(const Quat &raw, const Quat &gradOut);

/// Sigmoid kept strictly inside (0, 1) even where it saturates in double.
double activateOpacity(double raw);
double activateOpacityDerivative(double raw);
Vec3 activateColor(const Vec3 &raw);

// Assembly ----------------------------------------------------------------

Gaussian activateSample(const RawSample &raw, const SurfacePoint &anchor, const Vec2 &uv,
                        const ActivationConfig &cfg);

/// One Gaussian per valid grid point, in grid order. Throws EmptyGaussianSet
/// when the grid has no valid point.
GaussianSet assembleGaussians(const AttributeMaps &maps, const UvGrid &grid,
                              const ActivationConfig &cfg);

/// Chain rule from activated-attribute gradients back to raw map texels.
/// Returns a map-shaped gradient.
AttributeMaps assembleGaussiansBackward(const AttributeMaps &maps, const UvGrid &grid,
                                        const ActivationConfig &cfg,
                                        std::span<const GaussianGrad> grads);

// GGUV file format ---------------------------------------------------------

/// "GGUV", u32 version 1, u32 H, u32 W, u32 C = 14, then H*W*C little-endian
/// float32 values, row-major and channel-last.
void writeGguv(std::ostream &out, const AttributeMaps &maps);
AttributeMaps readGguv(std::istream &in);
void saveGguv(const std::string &path, const AttributeMaps &maps);
AttributeMaps loadGguv(const std::string &path);

} // namespace uvsplat
