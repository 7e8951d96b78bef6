// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
#include "raster_kernels.hpp"
#include "uvsplat/render.hpp"

namespace uvsplat::reference {

namespace {

FrameState
forward(const GaussianSet &gaussians, const Camera &cam, RenderMode mode, const Vec3 &background,
        RenderOutput *out) {
    FrameState st;
    st.width = cam.width;
    st.height = cam.height;
    st.tiled = false;
    st.sorted = detail::prepareSplats(gaussians, cam, mode);
    st.finalTransmittance.assign(cam.pixelCount(), 1.0);
    st.lastContributor.assign(cam.pixelCount(), 0);
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            const detail::PixelResult r = detail::compositePixel(st.sorted, x, y);
            const size_t p = size_t(y) * cam.width + x;
            st.finalTransmittance[p] = r.transmittance;
            st.lastContributor[p] = r.lastContributor;
            if (out)
                detail::writePixel(*out, x, y, r, background);
        }
    return st;
}

} // namespace

RenderOutput
render(const GaussianSet &gaussians, const Camera &cam, RenderMode mode, const Vec3 &background,
       FrameState *state) {
    cam.validate();
    detail::checkBackground(background);
    RenderOutput out = detail::makeOutput(cam, mode);
    FrameState st = forward(gaussians, cam, mode, background, &out);
    if (state)
        *state = std::move(st);
    return out;
}

SplatGradients
renderBackward(const GaussianSet &gaussians, const Camera &cam, RenderMode mode,
               const Vec3 &background, const Image &gradColor, const Image &gradAlpha,
               const FrameState *state) {
    cam.validate();
    detail::checkBackground(background);
    detail::checkGradShapes(cam, gradColor, gradAlpha);
    FrameState local;
    if (!state || state->tiled || state->width != cam.width || state->height != cam.height) {
        local = forward(gaussians, cam, mode, background, nullptr);
        state = &local;
    }
    std::vector<detail::Splat2DGrad> grads(state->sorted.size());
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            const size_t p = size_t(y) * cam.width + x;
            const double dColor[3] = {gradColor.at(x, y, 0), gradColor.at(x, y, 1),
                                      gradColor.at(x, y, 2)};
            detail::backpropPixel(state->sorted, grads, x, y, state->finalTransmittance[p],
                                  state->lastContributor[p], dColor, gradAlpha.at(x, y),
                                  background);
        }
    return detail::finishBackward(gaussians, cam, mode, state->sorted, grads);
}

} // namespace uvsplat::reference
