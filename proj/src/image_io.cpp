// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
#include "uvsplat/image.hpp"

#include "uvsplat/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace uvsplat {

namespace {

png_byte
quantize(double v) {
    return png_byte(std::lround(std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0) * 255.0));
}

struct FileCloser {
    void operator()(std::FILE *f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

void
writePng(const std::string &path, const Image &img) {
    if (img.channels != 1 && img.channels != 3)
        throw Error(ErrorKind::ShapeMismatch, "PNG output supports 1 or 3 channels");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp)
        throw Error(ErrorKind::IoError, "cannot create '" + path + "'");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error(ErrorKind::IoError, "libpng initialisation failed");
    }
    std::vector<png_byte> row(size_t(img.width) * img.channels);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorKind::IoError, "libpng failed writing '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8,
                 img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_sRGB(png, info, PNG_sRGB_INTENT_PERCEPTUAL);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width * img.channels; ++x) {
            const double v = img.data[size_t(y) * img.width * img.channels + x];
            row[x] = quantize(v);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image
readPng(const std::string &path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        throw Error(ErrorKind::IoError, "cannot read PNG '" + path + "': " + image.message);
    image.format = PNG_FORMAT_RGB;
    std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        png_image_free(&image);
        throw Error(ErrorKind::IoError, "cannot decode PNG '" + path + "'");
    }
    Image out(int(image.width), int(image.height), 3);
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = buffer[i] / 255.0;
    return out;
}

void
writePfm(const std::string &path, const Image &img) {
    if (img.channels != 1 && img.channels != 3)
        throw Error(ErrorKind::ShapeMismatch, "PFM output supports 1 or 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorKind::IoError, "cannot create '" + path + "'");
    out << (img.channels == 3 ? "PF" : "Pf") << '\n'
        << img.width << ' ' << img.height << '\n'
        << "-1.0\n";
    for (int y = img.height - 1; y >= 0; --y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                const float v = float(img.at(x, y, c));
                out.write(reinterpret_cast<const char *>(&v), sizeof(float));
            }
    }
    if (!out)
        throw Error(ErrorKind::IoError, "failed writing '" + path + "'");
}

Image
readPfm(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
    std::string tag;
    int w = 0, h = 0;
    double scale = 0.0;
    in >> tag >> w >> h >> scale;
    in.get();
    if (!in || (tag != "PF" && tag != "Pf") || w < 1 || h < 1)
        throw Error(ErrorKind::BadFormat, "bad PFM header in '" + path + "'");
    if (scale > 0.0)
        throw Error(ErrorKind::BadFormat, "big-endian PFM is not supported");
    Image img(w, h, tag == "PF" ? 3 : 1);
    for (int y = h - 1; y >= 0; --y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < img.channels; ++c) {
                float v = 0.0f;
                in.read(reinterpret_cast<char *>(&v), sizeof(float));
                img.at(x, y, c) = v;
            }
    if (!in)
        throw Error(ErrorKind::BadFormat, "truncated PFM '" + path + "'");
    return img;
}

Image
readImage(const std::string &path) {
    auto endsWith = [&](const char *ext) {
        const std::string e(ext);
        return path.size() >= e.size() && path.compare(path.size() - e.size(), e.size(), e) == 0;
    };
    if (endsWith(".pfm"))
        return readPfm(path);
    if (endsWith(".png"))
        return readPng(path);
    throw Error(ErrorKind::BadFormat, "unknown image extension for '" + path + "'");
}

} // namespace uvsplat
