// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace uvsplat {

/// Interleaved row-major image of doubles.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c), data(size_t(w) * h * c, fill) {}

    double &at(int x, int y, int c = 0) { return data[(size_t(y) * width + x) * channels + c]; }
    double at(int x, int y, int c = 0) const {
        return data[(size_t(y) * width + x) * channels + c];
    }
    size_t pixelCount() const { return size_t(width) * height; }
    bool sameShape(const Image &o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

/// 8-bit PNG tagged sRGB; values are treated as display-encoded, clamped to
/// [0,1] and quantized to v * 255. 1 or 3 channels.
void writePng(const std::string &path, const Image &img);
/// Bytes mapped back to b / 255, RGB. Alpha channels are dropped.
Image readPng(const std::string &path);

/// Portable float map (little-endian, bottom-to-top rows). 1 or 3 channels.
void writePfm(const std::string &path, const Image &img);
Image readPfm(const std::string &path);

/// Dispatches on the file extension (.png or .pfm).
Image readImage(const std::string &path);


} // namespace uvsplat
