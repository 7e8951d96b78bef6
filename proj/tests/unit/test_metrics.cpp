// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//

#include "scenes.hpp"

#include "uvsplat/error.hpp"
#include "uvsplat/metrics.hpp"
#include "uvsplat/render.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

using namespace uvsplat;
using namespace uvsplat::testing;

namespace {

Image
noise(std::mt19937_64 &rng, int w, int h, int c = 3) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image img(w, h, c);
    for (double &v : img.data)
        v = u(rng);
    return img;
}

} // namespace

TEST(Psnr, Examples) {
    std::mt19937_64 rng(1);
    const Image a = noise(rng, 16, 12);
    EXPECT_TRUE(std::isinf(psnr(a, a)));
    Image b(16, 12, 3, 0.5), c(16, 12, 3, 0.6), d(16, 12, 3, 0.7);
    EXPECT_NEAR(psnr(b, c), 20.0, 1e-9);
    EXPECT_NEAR(psnr(b, c) - psnr(b, d), 20.0 * std::log10(2.0), 1e-9);
    EXPECT_NEAR(psnr(b, d) + 6.0206, psnr(b, c), 1e-4);
    const Image e = noise(rng, 16, 12);
    EXPECT_EQ(psnr(a, e), psnr(e, a));
    EXPECT_THROW(psnr(a, Image(16, 11, 3)), Error);
}

TEST(Ssim, IdenticalIsExactlyOne) {
    std::mt19937_64 rng(2);
    for (int size : {5, 11, 40}) {
        const Image a = noise(rng, size, size + 3);
        EXPECT_EQ(ssim(a, a), 1.0);
    }
}

TEST(Ssim, NegativeAndSymmetry) {
    std::mt19937_64 rng(3);
    const Image a = noise(rng, 32, 24);
    Image neg = a;
    for (double &v : neg.data)
        v = 1.0 - v;
    EXPECT_LT(ssim(a, neg), 1.0);
    const Image b = noise(rng, 32, 24);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-15);
    EXPECT_GE(ssim(a, neg), -1.0);
}

TEST(Ssim, ConstantImagesMatchClosedForm) {
    // Zero variance everywhere: SSIM = (2ab + C1) / (a^2 + b^2 + C1).
    const double C1 = 0.01 * 0.01;
    for (auto [x, y] : {std::pair{0.2, 0.7}, std::pair{0.5, 0.55}, std::pair{0.9, 0.1}}) {
        const Image a(20, 20, 3, x), b(20, 20, 3, y);
        const double expected = (2 * x * y + C1) / (x * x + y * y + C1);
        EXPECT_NEAR(ssim(a, b), expected, 1e-12);
        EXPECT_LT(ssim(a, b), 1.0);
    }
}

TEST(Epi, StaticCameraGivesIdenticalRows) {
    std::mt19937_64 rng(4);
    const GaussianSet gs = randomScene(rng);
    const Camera cam = frontCamera(32, 60.0);
    const std::vector<Camera> path(5, cam);
    const ViewRenderer r = [&](const Camera &c) {
        return render(gs, c, RenderMode::Color, {1, 1, 1}).color;
    };
    const Image strip = epiStrip(r, path, {16, 4, 28});
    ASSERT_EQ(strip.width, 24);
    ASSERT_EQ(strip.height, 5);
    const Image frame = r(cam);
    for (int t = 0; t < 5; ++t)
        for (int x = 0; x < 24; ++x)
            for (int c = 0; c < 3; ++c)
                EXPECT_EQ(strip.at(x, t, c), frame.at(x + 4, 16, c));
}

TEST(Epi, EmptySceneIsWhite) {
    OrbitSpec spec;
    spec.frames = 4;
    spec.radius = 1.0;
    const std::vector<Camera> path = orbitCameras(spec);
    const Image strip = epiStrip(
        [](const Camera &c) { return render(GaussianSet{}, c, RenderMode::Color, {1, 1, 1}).color; },
        path, {10, 0, 64});
    for (double v : strip.data)
        EXPECT_EQ(v, 1.0);
}

TEST(Epi, OrbitStripIsFiniteAndDeterministic) {
    std::mt19937_64 rng(5);
    const GaussianSet gs = randomScene(rng);
    OrbitSpec spec;
    spec.frames = 12;
    spec.radius = 1.5;
    spec.elevation = 0.2;
    spec.focal = 60;
    spec.width = spec.height = 48;
    const std::vector<Camera> path = orbitCameras(spec);
    const ViewRenderer r = [&](const Camera &c) {
        return render(gs, c, RenderMode::Color, {1, 1, 1}).color;
    };
    const Image a = epiStrip(r, path, {24, 2, 46});
    const Image b = epiStrip(r, path, {24, 2, 46});
    EXPECT_EQ(std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)), 0);
    for (double v : a.data) {
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Epi, Errors) {
    const Camera cam = frontCamera(16, 20.0);
    const ViewRenderer r = [](const Camera &c) { return Image(c.width, c.height, 3, 1.0); };
    const std::vector<Camera> one(1, cam), two(2, cam);
    auto kindOf = [&](std::span<const Camera> path, EpiLine line) {
        try {
            epiStrip(r, path, line);
        } catch (const Error &e) {
            return e.kind();
        }
        return ErrorKind::IoError;
    };
    EXPECT_EQ(kindOf(one, {0, 0, 4}), ErrorKind::InvalidConfig);
    EXPECT_EQ(kindOf(two, {16, 0, 4}), ErrorKind::LineOutOfBounds);
    EXPECT_EQ(kindOf(two, {2, 10, 17}), ErrorKind::LineOutOfBounds);
    EXPECT_EQ(kindOf(two, {2, 5, 6}), ErrorKind::LineOutOfBounds);
    EXPECT_EQ(kindOf(two, {2, -1, 6}), ErrorKind::LineOutOfBounds);
}
