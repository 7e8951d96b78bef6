// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
#include "uvsplat/metrics.hpp"

#include "uvsplat/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace uvsplat {

double
psnr(const Image &a, const Image &b, double peak) {
    if (!a.sameShape(b))
        throw Error(ErrorKind::ShapeMismatch, "psnr: images differ in shape");
    if (a.data.empty())
        throw Error(ErrorKind::ShapeMismatch, "psnr: empty images");
    double se = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        se += d * d;
    }
    const double mse = se / double(a.data.size());
    if (mse == 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

namespace {

std::vector<double>
gaussianWindow(int size, double sigma) {
    std::vector<double> w(size);
    double sum = 0.0;
    const double c = 0.5 * (size - 1);
    for (int i = 0; i < size; ++i) {
        const double d = i - c;
        w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += w[i];
    }
    for (double &v : w)
        v /= sum;
    return w;
}

} // namespace

double
ssim(const Image &a, const Image &b) {
    if (!a.sameShape(b))
        throw Error(ErrorKind::ShapeMismatch, "ssim: images differ in shape");
    if (a.data.empty())
        throw Error(ErrorKind::ShapeMismatch, "ssim: empty images");
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    const int wx = std::min(11, a.width);
    const int wy = std::min(11, a.height);
    const std::vector<double> gx = gaussianWindow(wx, 1.5);
    const std::vector<double> gy = gaussianWindow(wy, 1.5);

    double total = 0.0;
    size_t count = 0;
    for (int c = 0; c < a.channels; ++c) {
        for (int y0 = 0; y0 + wy <= a.height; ++y0) {
            for (int x0 = 0; x0 + wx <= a.width; ++x0) {
                double muA = 0.0, muB = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
                for (int j = 0; j < wy; ++j)
                    for (int i = 0; i < wx; ++i) {
                        const double w = gy[j] * gx[i];
                        const double va = a.at(x0 + i, y0 + j, c);
                        const double vb = b.at(x0 + i, y0 + j, c);
                        muA += w * va;
                        muB += w * vb;
                        aa += w * va * va;
                        bb += w * vb * vb;
                        ab += w * va * vb;
                    }
                const double varA = aa - muA * muA;
                const double varB = bb - muB * muB;
                const double cov = ab - muA * muB;
                const double num = (2.0 * muA * muB + kC1) * (2.0 * cov + kC2);
                const double den = (muA * muA + muB * muB + kC1) * (varA + varB + kC2);
                total += num / den;
                ++count;
            }
        }
    }
    return total / double(count);
}

Image
epiStrip(const ViewRenderer &renderer, std::span<const Camera> path, const EpiLine &line) {
    if (path.size() < 2)
        throw Error(ErrorKind::InvalidConfig, "an EPI strip needs at least two cameras");
    const int length = line.colEnd - line.colStart;
    if (length < 2)
        throw Error(ErrorKind::LineOutOfBounds, "line segment must span at least two pixels");
    Image strip(length, int(path.size()), 3);
    for (size_t t = 0; t < path.size(); ++t) {
        const Image frame = renderer(path[t]);
        if (line.row < 0 || line.row >= frame.height || line.colStart < 0 ||
            line.colEnd > frame.width)
            throw Error(ErrorKind::LineOutOfBounds,
                        "line segment leaves rendering " + std::to_string(t));
        if (frame.channels != 3)
            throw Error(ErrorKind::ShapeMismatch, "EPI renderer must return RGB images");
        for (int i = 0; i < length; ++i)
            for (int c = 0; c < 3; ++c)
                strip.at(i, int(t), c) = frame.at(line.colStart + i, line.row, c);
    }
    return strip;
}

} // namespace uvsplat
