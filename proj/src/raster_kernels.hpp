// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
// Per-Gaussian and per-pixel kernels shared by the tiled and the reference
// rasterizers. Both paths call exactly these functions so their per-pixel
// arithmetic is identical.
#pragma once

#include "uvsplat/render.hpp"

#include <algorithm>
#include <cmath>
#include <ranges>
#include <span>

namespace uvsplat::detail {

struct ViewGeometry {
    Vec3 view;     // view-space mean
    Mat3 sigma;    // 3D covariance
    double j[2][3]; // projection Jacobian at the view mean
    double t[2][3]; // J * W
    Sym2 cov;      // 2D covariance including the low-pass term
};

inline ViewGeometry
viewGeometry(const Gaussian &g, const Camera &cam) {
    ViewGeometry out;
    out.view = cam.toCamera(g.position);
    out.sigma = gaussianCovariance(g.scale, g.rotation);
    const double tz = out.view.z;
    const double invZ = 1.0 / tz;
    const double invZ2 = invZ * invZ;
    out.j[0][0] = cam.fx * invZ;
    out.j[0][1] = 0.0;
    out.j[0][2] = -cam.fx * out.view.x * invZ2;
    out.j[1][0] = 0.0;
    out.j[1][1] = cam.fy * invZ;
    out.j[1][2] = -cam.fy * out.view.y * invZ2;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c)
            out.t[r][c] = out.j[r][0] * cam.rotation(0, c) + out.j[r][1] * cam.rotation(1, c) +
                          out.j[r][2] * cam.rotation(2, c);
    double ts[2][3];
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c)
            ts[r][c] = out.t[r][0] * out.sigma(0, c) + out.t[r][1] * out.sigma(1, c) +
                       out.t[r][2] * out.sigma(2, c);
    auto entry = [&](int a, int b) {
        return ts[a][0] * out.t[b][0] + ts[a][1] * out.t[b][1] + ts[a][2] * out.t[b][2];
    };
    out.cov = {entry(0, 0) + kLowPassVariance, entry(0, 1), entry(1, 1) + kLowPassVariance};
    return out;
}

/// Screen-space splat for one Gaussian, or nothing if culled.
inline std::optional<Splat2D>
makeSplat(const Gaussian &g, uint32_t id, const Camera &cam, RenderMode mode) {
    const Vec3 view = cam.toCamera(g.position);
    if (!(view.z >= cam.znear && view.z <= cam.zfar))
        return std::nullopt;
    // Alpha = opacity * exp(power) reaches kMinAlpha only where the
    // Mahalanobis distance squared is below 2 ln(opacity / kMinAlpha).
    const double opacity = g.opacity;
    if (!(opacity >= kMinAlpha))
        return std::nullopt;
    const ViewGeometry geo = viewGeometry(g, cam);
    const double det = geo.cov.det();
    if (!(det > 0.0))
        return std::nullopt;
    Splat2D s;
    s.meanX = cam.fx * view.x / view.z + cam.cx;
    s.meanY = cam.fy * view.y / view.z + cam.cy;
    s.conicA = geo.cov.yy / det;
    s.conicB = -geo.cov.xy / det;
    s.conicC = geo.cov.xx / det;
    s.opacity = opacity;
    s.skipPower = std::log(kMinAlpha / opacity) - 1e-9;
    s.depth = view.z;
    s.id = id;
    if (mode == RenderMode::Color) {
        s.color[0] = g.color.x;
        s.color[1] = g.color.y;
        s.color[2] = g.color.z;
    } else {
        s.color[0] = g.uv.x;
        s.color[1] = g.uv.y;
        s.color[2] = 0.0;
    }
    const double k = 2.0 * std::log(opacity / kMinAlpha);
    const double rx = std::sqrt(k * geo.cov.xx) + 1.0;
    const double ry = std::sqrt(k * geo.cov.yy) + 1.0;
    if (!std::isfinite(s.meanX) || !std::isfinite(s.meanY) || !std::isfinite(rx) ||
        !std::isfinite(ry))
        return std::nullopt;
    const double fx0 = std::ceil(s.meanX - rx), fx1 = std::floor(s.meanX + rx);
    const double fy0 = std::ceil(s.meanY - ry), fy1 = std::floor(s.meanY + ry);
    if (fx1 < 0.0 || fy1 < 0.0 || fx0 > cam.width - 1 || fy0 > cam.height - 1)
        return std::nullopt;
    s.x0 = int(std::max(fx0, 0.0));
    s.y0 = int(std::max(fy0, 0.0));
    s.x1 = int(std::min(fx1, double(cam.width - 1)));
    s.y1 = int(std::min(fy1, double(cam.height - 1)));
    return s;
}

/// Projects all Gaussians and returns the visible ones sorted front to back.
std::vector<Splat2D> prepareSplats(const GaussianSet &gaussians, const Camera &cam,
                                   RenderMode mode);

struct PixelResult {
    double color[3] = {0.0, 0.0, 0.0};
    double depth = 0.0;
    double transmittance = 1.0;
    uint32_t lastContributor = 0;
};

inline double
splatPower(const Splat2D &s, double dx, double dy) {
    return -0.5 * (s.conicA * dx * dx + s.conicC * dy * dy) - s.conicB * dx * dy;
}

/// Front-to-back compositing of one pixel over the entries of `splats`
/// listed (ascending) in `order`.
template <class Order>
PixelResult
compositePixel(std::span<const Splat2D> splats, const Order &order, double px, double py) {
    PixelResult out;
    double T = 1.0;
    for (const uint32_t k : order) {
        const Splat2D &s = splats[k];
        if (px < s.x0 || px > s.x1 || py < s.y0 || py > s.y1)
            continue; // outside the alpha support box
        const double dx = s.meanX - px;
        const double dy = s.meanY - py;
        const double power = splatPower(s, dx, dy);
        if (power > 0.0 || power < s.skipPower)
            continue;
        const double alpha = std::min(kMaxAlpha, s.opacity * std::exp(power));
        if (alpha < kMinAlpha)
            continue;
        const double nextT = T * (1.0 - alpha);
        if (nextT < kTransmittanceStop)
            break;
        const double w = alpha * T;
        out.color[0] += w * s.color[0];
        out.color[1] += w * s.color[1];
        out.color[2] += w * s.color[2];
        out.depth += w * s.depth;
        T = nextT;
        out.lastContributor = k + 1;
    }
    out.transmittance = T;
    return out;
}

inline PixelResult
compositePixel(std::span<const Splat2D> splats, double px, double py) {
    return compositePixel(splats, std::views::iota(uint32_t(0), uint32_t(splats.size())), px, py);
}

inline void
writePixel(RenderOutput &out, int x, int y, const PixelResult &r, const Vec3 &background) {
    const double T = r.transmittance;
    out.color.at(x, y, 0) = r.color[0] + T * background.x;
    out.color.at(x, y, 1) = r.color[1] + T * background.y;
    out.color.at(x, y, 2) = r.color[2] + T * background.z;
    const double a = 1.0 - T;
    out.alpha.at(x, y) = a;
    out.depth.at(x, y) = a > 0.0 ? r.depth / a : 0.0;
}

/// Back-to-front replay of one pixel; accumulates into `grads`, which is
/// aligned with `splats`.
template <class Order>
void
backpropPixel(std::span<const Splat2D> splats, const Order &order, std::span<Splat2DGrad> grads,
              double px, double py, double finalT, uint32_t lastContributor,
              const double dColor[3], double dAlpha, const Vec3 &background) {
    double T = finalT;
    double accum[3] = {0.0, 0.0, 0.0};
    double lastColor[3] = {0.0, 0.0, 0.0};
    double lastAlpha = 0.0;
    const double bgDot = background.x * dColor[0] + background.y * dColor[1] +
                         background.z * dColor[2];
    const auto first = std::ranges::begin(order);
    for (auto it = std::ranges::lower_bound(order, lastContributor); it != first;) {
        const uint32_t k = *--it;
        const Splat2D &s = splats[k];
        if (px < s.x0 || px > s.x1 || py < s.y0 || py > s.y1)
            continue; // outside the alpha support box
        const double dx = s.meanX - px;
        const double dy = s.meanY - py;
        const double power = splatPower(s, dx, dy);
        if (power > 0.0 || power < s.skipPower)
            continue;
        const double gauss = std::exp(power);
        const double raw = s.opacity * gauss;
        const double alpha = std::min(kMaxAlpha, raw);
        if (alpha < kMinAlpha)
            continue;
        const double oneMinus = 1.0 - alpha;
        T = T / oneMinus;
        const double w = alpha * T;
        Splat2DGrad &g = grads[k];
        double dLdAlpha = 0.0;
        for (int ch = 0; ch < 3; ++ch) {
            accum[ch] = lastAlpha * lastColor[ch] + (1.0 - lastAlpha) * accum[ch];
            lastColor[ch] = s.color[ch];
            dLdAlpha += (s.color[ch] - accum[ch]) * dColor[ch];
            g.color[ch] += w * dColor[ch];
        }
        dLdAlpha *= T;
        lastAlpha = alpha;
        // Background shine-through and the alpha output both depend on
        // T_final = prod(1 - alpha_j).
        dLdAlpha += (dAlpha - bgDot) * finalT / oneMinus;
        if (raw > kMaxAlpha)
            continue;
        const double dLdGauss = s.opacity * dLdAlpha;
        g.opacity += gauss * dLdAlpha;
        const double gd = dLdGauss * gauss;
        g.meanX += gd * (-s.conicA * dx - s.conicB * dy);
        g.meanY += gd * (-s.conicC * dy - s.conicB * dx);
        g.conicA += gd * (-0.5 * dx * dx);
        g.conicB += gd * (-dx * dy);
        g.conicC += gd * (-0.5 * dy * dy);
    }
}

inline void
backpropPixel(std::span<const Splat2D> splats, std::span<Splat2DGrad> grads, double px, double py,
              double finalT, uint32_t lastContributor, const double dColor[3], double dAlpha,
              const Vec3 &background) {
    backpropPixel(splats, std::views::iota(uint32_t(0), uint32_t(splats.size())), grads, px, py,
                  finalT, lastContributor, dColor, dAlpha, background);
}

/// Chain rule from screen-space splat partials to the Gaussian's attributes.
GaussianGrad splatGradTo3D(const Gaussian &g, const Camera &cam, const Splat2DGrad &grad,
                           RenderMode mode);

/// Sorted splats -> per-Gaussian gradients after pixel accumulation.
SplatGradients finishBackward(const GaussianSet &gaussians, const Camera &cam, RenderMode mode,
                              std::span<const Splat2D> splats,
                              std::span<const Splat2DGrad> splatGrads);

void checkBackground(const Vec3 &background);
void checkGradShapes(const Camera &cam, const Image &gradColor, const Image &gradAlpha);
RenderOutput makeOutput(const Camera &cam, RenderMode mode);

} // namespace uvsplat::detail
