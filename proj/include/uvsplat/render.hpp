// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable tile-based Gaussian rasterizer.
//
// Forward: every Gaussian is projected with the local affine (EWA) Jacobian,
// globally sorted by view-space depth (ties by index) and alpha-composited
// front to back per pixel. Backward replays each pixel back to front from its
// saved final transmittance.
//
// The tiled path parallelizes over tiles with OpenMP. Outputs do not depend
// on the tile size or the thread count: a Gaussian is binned into every tile
// overlapping the pixel rectangle outside of which its alpha is provably
// below the skip threshold, and gradient buffers are reduced in tile order.
#pragma once

#include "uvsplat/attribute_maps.hpp"
#include "uvsplat/camera.hpp"
#include "uvsplat/image.hpp"
#include "uvsplat/math.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace uvsplat {

inline constexpr double kLowPassVariance = 0.3;   // px^2 added to the 2D covariance diagonal
inline constexpr double kMaxAlpha = 0.99;
inline constexpr double kMinAlpha = 1.0 / 255.0;
inline constexpr double kTransmittanceStop = 1e-4; // stop once accumulated alpha exceeds 0.9999

enum class RenderMode { Color, UvCoords };

struct RenderOptions {
    int tileSize = 16;
};

struct RenderOutput {
    Image color; // H x W x 3
    Image alpha; // H x W, accumulated opacity
    Image depth; // H x W, alpha-normalized expected view depth; 0 where alpha = 0
    RenderMode mode = RenderMode::Color;
};

struct Projection {
    Vec2 mean;     // pixels
    Sym2 cov;      // pixels^2, low-pass included
    double depth;  // view-space z, meters
};

/// Returns nothing when the view-space depth is outside [znear, zfar] or the
/// footprint misses the image.
std::optional<Projection> projectGaussian(const Gaussian &g, const Camera &cam);

/// 3D covariance R(q) diag(s^2) R(q)^T.
Mat3 gaussianCovariance(const Vec3 &scale, const Quat &rotation);

namespace detail {

/// Screen-space record of one visible Gaussian.
struct Splat2D {
    double meanX = 0.0, meanY = 0.0;
    double conicA = 0.0, conicB = 0.0, conicC = 0.0; // inverse covariance (xx, xy, yy)
    double opacity = 0.0;
    double skipPower = 0.0; // exponent below which alpha < kMinAlpha
    double color[3] = {0.0, 0.0, 0.0};
    double depth = 0.0;
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1; // inclusive pixel rectangle of possible support
    uint32_t id = 0;
};

/// Partials w.r.t. the screen-space parameters of one splat.
struct Splat2DGrad {
    double meanX = 0.0, meanY = 0.0;
    double conicA = 0.0, conicB = 0.0, conicC = 0.0;
    double opacity = 0.0;
    double color[3] = {0.0, 0.0, 0.0};
};

} // namespace detail

/// Per-frame data kept by the forward pass for the backward pass.
struct FrameState {
    int width = 0, height = 0, tileSize = 0;
    bool tiled = true;
    std::vector<detail::Splat2D> sorted; // visible splats, front to back
    std::vector<uint32_t> tileOffsets;   // tiles + 1 (tiled path only)
    std::vector<detail::Splat2D> tileSplats;
    std::vector<double> finalTransmittance;
    std::vector<uint32_t> lastContributor; // per pixel, count into its splat list
};

RenderOutput render(const GaussianSet &gaussians, const Camera &cam, RenderMode mode,
                    const Vec3 &background, const RenderOptions &opts = {},
                    FrameState *state = nullptr);

/// Gradients of L = <gradColor, color> + <gradAlpha, alpha>. Pass the state
/// filled by the matching forward call to skip recomputing it. In UvCoords
/// mode colour partials are zero since the colours are fixed UVs.
SplatGradients renderBackward(const GaussianSet &gaussians, const Camera &cam, RenderMode mode,
                              const Vec3 &background, const Image &gradColor,
                              const Image &gradAlpha, const RenderOptions &opts = {},
                              const FrameState *state = nullptr);

struct DepthNormals {
    Image depth;   // H x W
    Image normals; // H x W x 3, camera space; zero where alpha < 0.5
};

/// Forward-only. Normals come from finite differences of the back-projected
/// depth map and face the camera.
DepthNormals renderDepthNormals(const GaussianSet &gaussians, const Camera &cam,
                                const RenderOptions &opts = {});

/// Serial, untiled rasterizer kept as the reference for the OpenMP path. It
/// evaluates every visible splat at every pixel.
namespace reference {

RenderOutput render(const GaussianSet &gaussians, const Camera &cam, RenderMode mode,
                    const Vec3 &background, FrameState *state = nullptr);

SplatGradients renderBackward(const GaussianSet &gaussians, const Camera &cam, RenderMode mode,
                              const Vec3 &background, const Image &gradColor,
                              const Image &gradAlpha, const FrameState *state = nullptr);

} // namespace reference

} // namespace uvsplat
