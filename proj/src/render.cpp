// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
#include "uvsplat/render.hpp"

#include "raster_kernels.hpp"
#include "uvsplat/error.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace uvsplat {

Mat3
gaussianCovariance(const Vec3 &scale, const Quat &rotation) {
    const Mat3 r = rotationFromQuat(rotation);
    Mat3 m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            m(i, j) = r(i, j) * scale[j];
    return m * transpose(m);
}

std::optional<Projection>
projectGaussian(const Gaussian &g, const Camera &cam) {
    const auto splat = detail::makeSplat(g, 0, cam, RenderMode::Color);
    if (!splat)
        return std::nullopt;
    const detail::ViewGeometry geo = detail::viewGeometry(g, cam);
    return Projection{{splat->meanX, splat->meanY}, geo.cov, splat->depth};
}

namespace detail {

std::vector<Splat2D>
prepareSplats(const GaussianSet &gaussians, const Camera &cam, RenderMode mode) {
    const int64_t n = int64_t(gaussians.size());
    std::vector<std::optional<Splat2D>> slots(static_cast<size_t>(n));
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i)
        slots[size_t(i)] = makeSplat(gaussians.gaussians[size_t(i)], uint32_t(i), cam, mode);
    std::vector<Splat2D> out;
    out.reserve(size_t(n));
    for (auto &s : slots)
        if (s)
            out.push_back(*s);
    std::sort(out.begin(), out.end(), [](const Splat2D &a, const Splat2D &b) {
        return a.depth < b.depth || (a.depth == b.depth && a.id < b.id);
    });
    return out;
}

void
checkBackground(const Vec3 &background) {
    for (int c = 0; c < 3; ++c)
        if (!(background[c] >= 0.0 && background[c] <= 1.0))
            throw Error(ErrorKind::InvalidBackground, "background channels must lie in [0,1]");
}

void
checkGradShapes(const Camera &cam, const Image &gradColor, const Image &gradAlpha) {
    if (gradColor.width != cam.width || gradColor.height != cam.height || gradColor.channels != 3)
        throw Error(ErrorKind::ShapeMismatch, "color gradient must be H x W x 3");
    if (gradAlpha.width != cam.width || gradAlpha.height != cam.height || gradAlpha.channels != 1)
        throw Error(ErrorKind::ShapeMismatch, "alpha gradient must be H x W");
}

RenderOutput
makeOutput(const Camera &cam, RenderMode mode) {
    RenderOutput out;
    out.color = Image(cam.width, cam.height, 3);
    out.alpha = Image(cam.width, cam.height, 1);
    out.depth = Image(cam.width, cam.height, 1);
    out.mode = mode;
    return out;
}

GaussianGrad
splatGradTo3D(const Gaussian &g, const Camera &cam, const Splat2DGrad &grad, RenderMode mode) {
    const ViewGeometry geo = viewGeometry(g, cam);
    const Sym2 &cov = geo.cov;
    const double A = cov.xx, B = cov.xy, C = cov.yy;
    const double det = cov.det();
    const double inv2 = 1.0 / (det * det);

    // conic = (C, -B, A) / det
    const double dA = inv2 * (-C * C * grad.conicA + B * C * grad.conicB - B * B * grad.conicC);
    const double dB = inv2 * (2.0 * B * C * grad.conicA - (det + 2.0 * B * B) * grad.conicB +
                              2.0 * A * B * grad.conicC);
    const double dC = inv2 * (-B * B * grad.conicA + A * B * grad.conicB - A * A * grad.conicC);
    // Symmetric adjoint of cov: off-diagonal split evenly.
    const double gCov[2][2] = {{dA, 0.5 * dB}, {0.5 * dB, dC}};

    // dL/dSigma = T^T gCov T
    Mat3 dSigma;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b)
                    acc += geo.t[a][i] * gCov[a][b] * geo.t[b][j];
            dSigma(i, j) = acc;
        }

    // dL/dT = 2 gCov T Sigma, then dL/dJ = dL/dT W^T
    double gT[2][3];
    for (int a = 0; a < 2; ++a)
        for (int j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (int b = 0; b < 2; ++b)
                for (int k = 0; k < 3; ++k)
                    acc += gCov[a][b] * geo.t[b][k] * geo.sigma(k, j);
            gT[a][j] = 2.0 * acc;
        }
    double gJ[2][3];
    for (int a = 0; a < 2; ++a)
        for (int r = 0; r < 3; ++r)
            gJ[a][r] = gT[a][0] * cam.rotation(r, 0) + gT[a][1] * cam.rotation(r, 1) +
                       gT[a][2] * cam.rotation(r, 2);

    const Vec3 &t = geo.view;
    const double invZ = 1.0 / t.z;
    const double invZ2 = invZ * invZ;
    const double invZ3 = invZ2 * invZ;
    Vec3 dView;
    dView.x = gJ[0][2] * (-cam.fx * invZ2) + grad.meanX * cam.fx * invZ;
    dView.y = gJ[1][2] * (-cam.fy * invZ2) + grad.meanY * cam.fy * invZ;
    dView.z = gJ[0][0] * (-cam.fx * invZ2) + gJ[0][2] * (2.0 * cam.fx * t.x * invZ3) +
              gJ[1][1] * (-cam.fy * invZ2) + gJ[1][2] * (2.0 * cam.fy * t.y * invZ3) +
              grad.meanX * (-cam.fx * t.x * invZ2) + grad.meanY * (-cam.fy * t.y * invZ2);

    GaussianGrad out;
    out.position = transpose(cam.rotation) * dView;

    // Sigma = M M^T with M = R diag(s): dL/dM = 2 dSigma M.
    const Mat3 R = rotationFromQuat(g.rotation);
    Mat3 M;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            M(i, j) = R(i, j) * g.scale[j];
    const Mat3 dM = dSigma * M;
    Mat3 dR;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const double v = 2.0 * dM(i, j);
            out.scale[j] += v * R(i, j);
            dR(i, j) = v * g.scale[j];
        }

    const double w = g.rotation.w, x = g.rotation.x, y = g.rotation.y, z = g.rotation.z;
    out.rotation.w = 2.0 * (-z * dR(0, 1) + y * dR(0, 2) + z * dR(1, 0) - x * dR(1, 2) -
                            y * dR(2, 0) + x * dR(2, 1));
    out.rotation.x = 2.0 * (y * dR(0, 1) + z * dR(0, 2) + y * dR(1, 0) - 2.0 * x * dR(1, 1) -
                            w * dR(1, 2) + z * dR(2, 0) + w * dR(2, 1) - 2.0 * x * dR(2, 2));
    out.rotation.y = 2.0 * (-2.0 * y * dR(0, 0) + x * dR(0, 1) + w * dR(0, 2) + x * dR(1, 0) +
                            z * dR(1, 2) - w * dR(2, 0) + z * dR(2, 1) - 2.0 * y * dR(2, 2));
    out.rotation.z = 2.0 * (-2.0 * z * dR(0, 0) - w * dR(0, 1) + x * dR(0, 2) + w * dR(1, 0) -
                            2.0 * z * dR(1, 1) + y * dR(1, 2) + x * dR(2, 0) + y * dR(2, 1));

    if (mode == RenderMode::Color)
        out.color = {grad.color[0], grad.color[1], grad.color[2]};
    out.opacity = grad.opacity;
    return out;
}

SplatGradients
finishBackward(const GaussianSet &gaussians, const Camera &cam, RenderMode mode,
               std::span<const Splat2D> splats, std::span<const Splat2DGrad> splatGrads) {
    SplatGradients out(gaussians.size());
    const int64_t n = int64_t(splats.size());
#pragma omp parallel for schedule(static)
    for (int64_t k = 0; k < n; ++k) {
        const Splat2D &s = splats[size_t(k)];
        out[s.id] = splatGradTo3D(gaussians.gaussians[s.id], cam, splatGrads[size_t(k)], mode);
    }
    return out;
}

namespace {

// Entries of a tile list whose support box spans row y, in list order. The
// per-pixel kernels then only test these.
void
rowEntries(std::span<const Splat2D> list, int y, std::vector<uint32_t> &row) {
    row.clear();
    for (size_t k = 0; k < list.size(); ++k)
        if (list[k].y0 <= y && y <= list[k].y1)
            row.push_back(uint32_t(k));
}

void
buildTiles(FrameState &st) {
    const int ts = st.tileSize;
    const int tilesX = (st.width + ts - 1) / ts;
    const int tilesY = (st.height + ts - 1) / ts;
    const size_t tileCount = size_t(tilesX) * tilesY;
    std::vector<uint32_t> counts(tileCount + 1, 0);
    for (const Splat2D &s : st.sorted)
        for (int ty = s.y0 / ts; ty <= s.y1 / ts; ++ty)
            for (int tx = s.x0 / ts; tx <= s.x1 / ts; ++tx)
                ++counts[size_t(ty) * tilesX + tx + 1];
    std::partial_sum(counts.begin(), counts.end(), counts.begin());
    st.tileOffsets = counts;
    st.tileSplats.resize(counts.back());
    std::vector<uint32_t> cursor(counts.begin(), counts.end() - 1);
    for (const Splat2D &s : st.sorted)
        for (int ty = s.y0 / ts; ty <= s.y1 / ts; ++ty)
            for (int tx = s.x0 / ts; tx <= s.x1 / ts; ++tx)
                st.tileSplats[cursor[size_t(ty) * tilesX + tx]++] = s;
}

FrameState
forwardTiled(const GaussianSet &gaussians, const Camera &cam, RenderMode mode,
             const Vec3 &background, const RenderOptions &opts, RenderOutput *out) {
    if (opts.tileSize < 1)
        throw Error(ErrorKind::InvalidConfig, "tile size must be positive");
    FrameState st;
    st.width = cam.width;
    st.height = cam.height;
    st.tileSize = opts.tileSize;
    st.tiled = true;
    st.sorted = prepareSplats(gaussians, cam, mode);
    buildTiles(st);
    st.finalTransmittance.assign(cam.pixelCount(), 1.0);
    st.lastContributor.assign(cam.pixelCount(), 0);

    const int ts = st.tileSize;
    const int tilesX = (st.width + ts - 1) / ts;
    const int64_t tileCount = int64_t(st.tileOffsets.size() - 1);
#pragma omp parallel for schedule(dynamic, 1)
    for (int64_t tile = 0; tile < tileCount; ++tile) {
        const int tx = int(tile % tilesX), ty = int(tile / tilesX);
        const std::span<const Splat2D> list(st.tileSplats.data() + st.tileOffsets[size_t(tile)],
                                            st.tileOffsets[size_t(tile) + 1] -
                                                st.tileOffsets[size_t(tile)]);
        const int yEnd = std::min(st.height, (ty + 1) * ts);
        const int xEnd = std::min(st.width, (tx + 1) * ts);
        std::vector<uint32_t> row;
        for (int y = ty * ts; y < yEnd; ++y) {
            rowEntries(list, y, row);
            for (int x = tx * ts; x < xEnd; ++x) {
                const PixelResult r = compositePixel(list, row, x, y);
                const size_t p = size_t(y) * st.width + x;
                st.finalTransmittance[p] = r.transmittance;
                st.lastContributor[p] = r.lastContributor;
                if (out)
                    writePixel(*out, x, y, r, background);
            }
        }
    }
    return st;
}

} // namespace
} // namespace detail

RenderOutput
render(const GaussianSet &gaussians, const Camera &cam, RenderMode mode, const Vec3 &background,
       const RenderOptions &opts, FrameState *state) {
    cam.validate();
    detail::checkBackground(background);
    RenderOutput out = detail::makeOutput(cam, mode);
    FrameState st = detail::forwardTiled(gaussians, cam, mode, background, opts, &out);
    if (state)
        *state = std::move(st);
    return out;
}

SplatGradients
renderBackward(const GaussianSet &gaussians, const Camera &cam, RenderMode mode,
               const Vec3 &background, const Image &gradColor, const Image &gradAlpha,
               const RenderOptions &opts, const FrameState *state) {
    using namespace detail;
    cam.validate();
    checkBackground(background);
    checkGradShapes(cam, gradColor, gradAlpha);
    FrameState local;
    if (!state || !state->tiled || state->width != cam.width || state->height != cam.height) {
        local = forwardTiled(gaussians, cam, mode, background, opts, nullptr);
        state = &local;
    }
    const FrameState &st = *state;
    const int ts = st.tileSize;
    const int tilesX = (st.width + ts - 1) / ts;
    const int64_t tileCount = int64_t(st.tileOffsets.size() - 1);

    // One gradient slot per (tile, splat) entry; tiles write disjoint ranges.
    std::vector<Splat2DGrad> entryGrads(st.tileSplats.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (int64_t tile = 0; tile < tileCount; ++tile) {
        const size_t begin = st.tileOffsets[size_t(tile)];
        const size_t count = st.tileOffsets[size_t(tile) + 1] - begin;
        if (count == 0)
            continue;
        const std::span<const Splat2D> list(st.tileSplats.data() + begin, count);
        const std::span<Splat2DGrad> grads(entryGrads.data() + begin, count);
        const int tx = int(tile % tilesX), ty = int(tile / tilesX);
        const int yEnd = std::min(st.height, (ty + 1) * ts);
        const int xEnd = std::min(st.width, (tx + 1) * ts);
        std::vector<uint32_t> row;
        for (int y = ty * ts; y < yEnd; ++y) {
            rowEntries(list, y, row);
            for (int x = tx * ts; x < xEnd; ++x) {
                const size_t p = size_t(y) * st.width + x;
                const double dColor[3] = {gradColor.at(x, y, 0), gradColor.at(x, y, 1),
                                          gradColor.at(x, y, 2)};
                backpropPixel(list, row, grads, x, y, st.finalTransmittance[p],
                              st.lastContributor[p], dColor, gradAlpha.at(x, y), background);
            }
        }
    }

    // Fixed-order reduction: tiles ascending, entries in list order.
    std::vector<Splat2DGrad> perSplat(st.sorted.size());
    std::vector<uint32_t> slotOfId(gaussians.size(), 0);
    for (size_t k = 0; k < st.sorted.size(); ++k)
        slotOfId[st.sorted[k].id] = uint32_t(k);
    for (size_t e = 0; e < st.tileSplats.size(); ++e) {
        Splat2DGrad &dst = perSplat[slotOfId[st.tileSplats[e].id]];
        const Splat2DGrad &src = entryGrads[e];
        dst.meanX += src.meanX;
        dst.meanY += src.meanY;
        dst.conicA += src.conicA;
        dst.conicB += src.conicB;
        dst.conicC += src.conicC;
        dst.opacity += src.opacity;
        for (int c = 0; c < 3; ++c)
            dst.color[c] += src.color[c];
    }
    return finishBackward(gaussians, cam, mode, st.sorted, perSplat);
}

DepthNormals
renderDepthNormals(const GaussianSet &gaussians, const Camera &cam, const RenderOptions &opts) {
    const RenderOutput out = render(gaussians, cam, RenderMode::Color, {0.0, 0.0, 0.0}, opts);
    DepthNormals dn;
    dn.depth = out.depth;
    dn.normals = Image(cam.width, cam.height, 3);
    auto covered = [&](int x, int y) {
        return x >= 0 && y >= 0 && x < cam.width && y < cam.height && out.alpha.at(x, y) >= 0.5;
    };
    auto backProject = [&](int x, int y) {
        const double d = out.depth.at(x, y);
        return Vec3{d * (x - cam.cx) / cam.fx, d * (y - cam.cy) / cam.fy, d};
    };
#pragma omp parallel for schedule(static)
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            if (!covered(x, y))
                continue;
            const Vec3 p = backProject(x, y);
            Vec3 du, dv;
            if (covered(x + 1, y))
                du = backProject(x + 1, y) - p;
            else if (covered(x - 1, y))
                du = p - backProject(x - 1, y);
            else
                continue;
            if (covered(x, y + 1))
                dv = backProject(x, y + 1) - p;
            else if (covered(x, y - 1))
                dv = p - backProject(x, y - 1);
            else
                continue;
            const Vec3 n = cross(dv, du);
            const double len = norm(n);
            if (!(len > 0.0))
                continue;
            for (int c = 0; c < 3; ++c)
                dn.normals.at(x, y, c) = n[c] / len;
        }
    }
    return dn;
}

} // namespace uvsplat
