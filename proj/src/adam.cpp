// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
#include "uvsplat/adam.hpp"

#include "binary_io.hpp"
#include "uvsplat/attribute_maps.hpp"
#include "uvsplat/error.hpp"

#include <cmath>
#include <fstream>

namespace uvsplat {

void
AdamParams::validate() const {
    if (!(learningRate > 0.0))
        throw Error(ErrorKind::InvalidConfig, "learning_rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0))
        throw Error(ErrorKind::InvalidConfig, "adam_beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0))
        throw Error(ErrorKind::InvalidConfig, "adam_beta2 must lie in [0, 1)");
    if (!(eps > 0.0))
        throw Error(ErrorKind::InvalidConfig, "adam_eps must be positive");
}

void
adamStep(std::span<double> params, std::span<const double> grads, AdamState &state,
         const AdamParams &p) {
    if (grads.size() != params.size() || state.m.size() != params.size() ||
        state.v.size() != params.size())
        throw Error(ErrorKind::ShapeMismatch, "adamStep: parameter, gradient and state sizes differ");
    ++state.step;
    const double c1 = 1.0 - std::pow(p.beta1, double(state.step));
    const double c2 = 1.0 - std::pow(p.beta2, double(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = p.beta1 * state.m[i] + (1.0 - p.beta1) * g;
        state.v[i] = p.beta2 * state.v[i] + (1.0 - p.beta2) * g * g;
        const double mHat = state.m[i] / c1;
        const double vHat = state.v[i] / c2;
        params[i] -= p.learningRate * mHat / (std::sqrt(vHat) + p.eps);
    }
}

void
writeOptimizerState(std::ostream &out, const AdamState &state, int height, int width) {
    const size_t count = size_t(height) * width * channel::kCount;
    if (state.m.size() != count || state.v.size() != count)
        throw Error(ErrorKind::ShapeMismatch, "optimizer state does not match the map shape");
    out.write("GGOS", 4);
    detail::writeLe<uint32_t>(out, 1);
    detail::writeLe<uint32_t>(out, uint32_t(height));
    detail::writeLe<uint32_t>(out, uint32_t(width));
    detail::writeLe<uint32_t>(out, uint32_t(channel::kCount));
    detail::writeLe<int64_t>(out, state.step);
    for (double v : state.m)
        detail::writeLe<double>(out, v);
    for (double v : state.v)
        detail::writeLe<double>(out, v);
    if (!out)
        throw Error(ErrorKind::IoError, "failed writing GGOS stream");
}

AdamState
readOptimizerState(std::istream &in, int &height, int &width) {
    detail::expectMagic(in, "GGOS");
    if (detail::readLe<uint32_t>(in, "GGOS version") != 1)
        throw Error(ErrorKind::BadFormat, "unsupported GGOS version");
    height = int(detail::readLe<uint32_t>(in, "GGOS height"));
    width = int(detail::readLe<uint32_t>(in, "GGOS width"));
    if (detail::readLe<uint32_t>(in, "GGOS channels") != uint32_t(channel::kCount))
        throw Error(ErrorKind::BadFormat, "GGOS channel count must be 14");
    if (height < 1 || width < 1 || height > 65536 || width > 65536)
        throw Error(ErrorKind::BadFormat, "GGOS dimensions out of range");
    AdamState state;
    state.step = detail::readLe<int64_t>(in, "GGOS step");
    const size_t count = size_t(height) * width * channel::kCount;
    state.m.resize(count);
    state.v.resize(count);
    for (double &v : state.m)
        v = detail::readLe<double>(in, "GGOS first moment");
    for (double &v : state.v)
        v = detail::readLe<double>(in, "GGOS second moment");
    return state;
}

void
saveOptimizerState(const std::string &path, const AdamState &state, int height, int width) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorKind::IoError, "cannot create '" + path + "'");
    writeOptimizerState(out, state, height, width);
}

} // namespace uvsplat
