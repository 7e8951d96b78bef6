// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
#include "uvsplat/attribute_maps.hpp"

#include "binary_io.hpp"
#include "uvsplat/error.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

namespace uvsplat {

AttributeMaps::AttributeMaps(int height, int width, double fill)
    : mHeight(height), mWidth(width) {
    if (height < 1 || width < 1)
        throw Error(ErrorKind::InvalidConfig, "attribute maps need positive dimensions");
    mData.assign(size_t(height) * width * channel::kCount, fill);
}

std::vector<double>
AttributeMaps::gatherChannels(int first, int count) const {
    std::vector<double> out;
    out.reserve(texelCount() * count);
    for (size_t t = 0; t < texelCount(); ++t)
        for (int c = 0; c < count; ++c)
            out.push_back(mData[t * channel::kCount + first + c]);
    return out;
}

bool
AttributeMaps::allFinite() const {
    return std::all_of(mData.begin(), mData.end(), [](double v) { return std::isfinite(v); });
}

void
ActivationConfig::validate() const {
    if (!(gammaPos > 0.0))
        throw Error(ErrorKind::InvalidConfig, "gamma_pos must be positive");
    if (!(sMax < sInit))
        throw Error(ErrorKind::InvalidConfig, "s_max must be below s_init");
}

BilinearTaps
bilinearTaps(int height, int width, const Vec2 &uv) {
    if (!(uv.x >= 0.0 && uv.x <= 1.0 && uv.y >= 0.0 && uv.y <= 1.0))
        throw Error(ErrorKind::CoordOutOfDomain,
                    "UV (" + std::to_string(uv.x) + ", " + std::to_string(uv.y) + ") outside [0,1]^2");
    const double x = std::clamp(uv.x * width - 0.5, 0.0, double(width - 1));
    const double y = std::clamp(uv.y * height - 0.5, 0.0, double(height - 1));
    const int i0 = std::min(int(x), width - 1);
    const int j0 = std::min(int(y), height - 1);
    const int i1 = std::min(i0 + 1, width - 1);
    const int j1 = std::min(j0 + 1, height - 1);
    const double fx = x - i0;
    const double fy = y - j0;
    BilinearTaps taps;
    taps.texel = {uint32_t(j0 * width + i0), uint32_t(j0 * width + i1), uint32_t(j1 * width + i0),
                  uint32_t(j1 * width + i1)};
    taps.weight = {(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy};
    return taps;
}

std::vector<RawSample>
gridSample(const AttributeMaps &maps, std::span<const Vec2> coords) {
    std::vector<RawSample> out(coords.size());
    const auto data = maps.data();
    for (size_t k = 0; k < coords.size(); ++k) {
        const BilinearTaps taps = bilinearTaps(maps.height(), maps.width(), coords[k]);
        RawSample &row = out[k];
        row.fill(0.0);
        for (int t = 0; t < 4; ++t) {
            const double w = taps.weight[t];
            const double *texel = &data[size_t(taps.texel[t]) * channel::kCount];
            for (int c = 0; c < channel::kCount; ++c)
                row[c] += w * texel[c];
        }
    }
    return out;
}

void
gridSampleBackward(std::span<const Vec2> coords, std::span<const RawSample> sampleGrad,
                   AttributeMaps &mapGrad) {
    if (coords.size() != sampleGrad.size())
        throw Error(ErrorKind::ShapeMismatch, "gridSampleBackward: coords and grads differ in size");
    auto data = mapGrad.data();
    for (size_t k = 0; k < coords.size(); ++k) {
        const BilinearTaps taps = bilinearTaps(mapGrad.height(), mapGrad.width(), coords[k]);
        for (int t = 0; t < 4; ++t) {
            const double w = taps.weight[t];
            double *texel = &data[size_t(taps.texel[t]) * channel::kCount];
            for (int c = 0; c < channel::kCount; ++c)
                texel[c] += w * sampleGrad[k][c];
        }
    }
}

Vec3
activatePosition(const Vec3 &raw, const Vec3 &anchor, const ActivationConfig &cfg) {
    return {anchor.x + cfg.gammaPos * std::tanh(raw.x), anchor.y + cfg.gammaPos * std::tanh(raw.y),
            anchor.z + cfg.gammaPos * std::tanh(raw.z)};
}

Vec3
activatePositionGrad(const Vec3 &raw, const Vec3 &gradOut, const ActivationConfig &cfg) {
    Vec3 out;
    for (int i = 0; i < 3; ++i) {
        const double t = std::tanh(raw[i]);
        out[i] = gradOut[i] * cfg.gammaPos * (1.0 - t * t);
    }
    return out;
}

double
activateScale(double raw, const ActivationConfig &cfg) {
    const double s = std::exp(-cfg.sMax - softplus(-(raw - cfg.sInit) - cfg.sMax));
    return std::max(s, std::numeric_limits<double>::min());
}

double
activateScaleDerivative(double raw, const ActivationConfig &cfg) {
    const double s = std::exp(-cfg.sMax - softplus(-(raw - cfg.sInit) - cfg.sMax));
    if (s < std::numeric_limits<double>::min())
        return 0.0;
    // d/draw [-softplus(z)] with z = -(raw - sInit) - sMax is sigmoid(z).
    return s * sigmoid(-(raw - cfg.sInit) - cfg.sMax);
}

namespace {
constexpr double kOpacityLo = std::numeric_limits<double>::min();
const double kOpacityHi = std::nextafter(1.0, 0.0);
} // namespace

double
activateOpacity(double raw) {
    return std::clamp(sigmoid(raw), kOpacityLo, kOpacityHi);
}

double
activateOpacityDerivative(double raw) {
    const double s = sigmoid(raw);
    if (s < kOpacityLo || s > kOpacityHi)
        return 0.0;
    return s * (1.0 - s);
}

Vec3
activateScale(const Vec3 &raw, const ActivationConfig &cfg) {
    return {activateScale(raw.x, cfg), activateScale(raw.y, cfg), activateScale(raw.z, cfg)};
}

namespace {
constexpr double kMinQuatNorm = 1e-12;
}

Quat
activateRotation(const Quat &raw) {
    const double n = std::sqrt(raw.w * raw.w + raw.x * raw.x + raw.y * raw.y + raw.z * raw.z);
    if (n < kMinQuatNorm)
        return {};
    return {raw.w / n, raw.x / n, raw.y / n, raw.z / n};
}

Quat
activateRotationGrad(const Quat &raw, const Quat &gradOut) {
    const double n = std::sqrt(raw.w * raw.w + raw.x * raw.x + raw.y * raw.y + raw.z * raw.z);
    if (n < kMinQuatNorm)
        return {0.0, 0.0, 0.0, 0.0};
    // d(r/|r|) = (I - q q^T) / |r|
    const Quat q{raw.w / n, raw.x / n, raw.y / n, raw.z / n};
    const double qg = q.w * gradOut.w + q.x * gradOut.x + q.y * gradOut.y + q.z * gradOut.z;
    return {(gradOut.w - q.w * qg) / n, (gradOut.x - q.x * qg) / n, (gradOut.y - q.y * qg) / n,
            (gradOut.z - q.z * qg) / n};
}

Vec3
activateColor(const Vec3 &raw) {
    return {sigmoid(raw.x), sigmoid(raw.y), sigmoid(raw.z)};
}

Gaussian
activateSample(const RawSample &raw, const SurfacePoint &anchor, const Vec2 &uv,
               const ActivationConfig &cfg) {
    using namespace channel;
    Gaussian g;
    g.anchor = anchor.position;
    g.uv = uv;
    g.position = activatePosition({raw[kPosition], raw[kPosition + 1], raw[kPosition + 2]},
                                  anchor.position, cfg);
    g.scale = activateScale(Vec3{raw[kScale], raw[kScale + 1], raw[kScale + 2]}, cfg);
    g.rotation = activateRotation(
        {raw[kRotation], raw[kRotation + 1], raw[kRotation + 2], raw[kRotation + 3]});
    g.color = activateColor({raw[kColor], raw[kColor + 1], raw[kColor + 2]});
    g.opacity = activateOpacity(raw[kOpacity]);
    return g;
}

namespace {

std::vector<Vec2>
validCoords(const UvGrid &grid) {
    std::vector<Vec2> coords;
    coords.reserve(grid.validIds.size());
    for (uint32_t id : grid.validIds)
        coords.push_back(grid.coords[id]);
    return coords;
}

} // namespace

GaussianSet
assembleGaussians(const AttributeMaps &maps, const UvGrid &grid, const ActivationConfig &cfg) {
    if (grid.validIds.empty())
        throw Error(ErrorKind::EmptyGaussianSet, "UV grid has no valid point");
    const std::vector<Vec2> coords = validCoords(grid);
    const std::vector<RawSample> raw = gridSample(maps, coords);
    GaussianSet out;
    out.gaussians.resize(coords.size());
    for (size_t k = 0; k < coords.size(); ++k)
        out.gaussians[k] = activateSample(raw[k], grid.anchors[k], coords[k], cfg);
    return out;
}

AttributeMaps
assembleGaussiansBackward(const AttributeMaps &maps, const UvGrid &grid,
                          const ActivationConfig &cfg, std::span<const GaussianGrad> grads) {
    using namespace channel;
    if (grads.size() != grid.validIds.size())
        throw Error(ErrorKind::ShapeMismatch, "gradient count differs from Gaussian count");
    const std::vector<Vec2> coords = validCoords(grid);
    const std::vector<RawSample> raw = gridSample(maps, coords);
    std::vector<RawSample> rawGrad(coords.size());
    for (size_t k = 0; k < coords.size(); ++k) {
        const RawSample &r = raw[k];
        const GaussianGrad &g = grads[k];
        RawSample &out = rawGrad[k];
        const Vec3 dp = activatePositionGrad({r[kPosition], r[kPosition + 1], r[kPosition + 2]},
                                             g.position, cfg);
        for (int i = 0; i < 3; ++i) {
            out[kPosition + i] = dp[i];
            out[kScale + i] = g.scale[i] * activateScaleDerivative(r[kScale + i], cfg);
            const double s = sigmoid(r[kColor + i]);
            out[kColor + i] = g.color[i] * s * (1.0 - s);
        }
        const Quat dq = activateRotationGrad(
            {r[kRotation], r[kRotation + 1], r[kRotation + 2], r[kRotation + 3]}, g.rotation);
        for (int i = 0; i < 4; ++i)
            out[kRotation + i] = dq[i];
        out[kOpacity] = g.opacity * activateOpacityDerivative(r[kOpacity]);
    }
    AttributeMaps mapGrad(maps.height(), maps.width(), 0.0);
    gridSampleBackward(coords, rawGrad, mapGrad);
    return mapGrad;
}

void
writeGguv(std::ostream &out, const AttributeMaps &maps) {
    out.write("GGUV", 4);
    detail::writeLe<uint32_t>(out, 1);
    detail::writeLe<uint32_t>(out, uint32_t(maps.height()));
    detail::writeLe<uint32_t>(out, uint32_t(maps.width()));
    detail::writeLe<uint32_t>(out, uint32_t(channel::kCount));
    for (double v : maps.data())
        detail::writeLe<float>(out, float(v));
    if (!out)
        throw Error(ErrorKind::IoError, "failed writing GGUV stream");
}

AttributeMaps
readGguv(std::istream &in) {
    detail::expectMagic(in, "GGUV");
    const auto version = detail::readLe<uint32_t>(in, "GGUV version");
    if (version != 1)
        throw Error(ErrorKind::BadFormat, "unsupported GGUV version " + std::to_string(version));
    const auto h = detail::readLe<uint32_t>(in, "GGUV height");
    const auto w = detail::readLe<uint32_t>(in, "GGUV width");
    const auto c = detail::readLe<uint32_t>(in, "GGUV channels");
    if (c != uint32_t(channel::kCount))
        throw Error(ErrorKind::BadFormat, "GGUV channel count must be 14, got " + std::to_string(c));
    if (h == 0 || w == 0 || h > 65536 || w > 65536)
        throw Error(ErrorKind::BadFormat, "GGUV dimensions out of range");
    AttributeMaps maps{int(h), int(w)};
    for (double &v : maps.data()) {
        v = detail::readLe<float>(in, "GGUV payload");
        if (!std::isfinite(v))
            throw Error(ErrorKind::BadFormat, "GGUV payload contains a non-finite value");
    }
    return maps;
}

void
saveGguv(const std::string &path, const AttributeMaps &maps) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorKind::IoError, "cannot create '" + path + "'");
    writeGguv(out, maps);
}

AttributeMaps
loadGguv(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
    return readGguv(in);
}

} // namespace uvsplat
