// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "uvsplat/camera.hpp"
#include "uvsplat/image.hpp"

#include <functional>
#include <span>

namespace uvsplat {

/// 10 log10(peak^2 / MSE); +infinity for identical images.
double psnr(const Image &a, const Image &b, double peak = 1.0);

/// Mean local SSIM with an 11x11 Gaussian window (stddev 1.5), k1 = 0.01,
/// k2 = 0.03 and a dynamic range of 1, averaged over channels. Windows are
/// evaluated where they fit entirely ("valid" positions); images smaller than
/// the window use a window clipped to the image.
double ssim(const Image &a, const Image &b);

struct EpiLine {
    int row = 0;
    int colStart = 0;
    int colEnd = 0; // exclusive
};

using ViewRenderer = std::function<Image(const Camera &)>;

/// Row t of the strip holds pixels [colStart, colEnd) of `line.row` from the
/// rendering of camera t. Throws LineOutOfBounds or InvalidConfig.
Image epiStrip(const ViewRenderer &renderer, std::span<const Camera> path, const EpiLine &line);

} // namespace uvsplat
