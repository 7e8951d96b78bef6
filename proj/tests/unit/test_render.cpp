// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//

#include "gradcheck.hpp"
#include "oracle.hpp"
#include "scenes.hpp"

#include "uvsplat/error.hpp"
#include "uvsplat/parallel.hpp"
#include "uvsplat/render.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

using namespace uvsplat;
using namespace uvsplat::testing;

namespace {

bool
bitwiseEqual(const Image &a, const Image &b) {
    return a.sameShape(b) &&
           std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

bool
bitwiseEqual(const SplatGradients &a, const SplatGradients &b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(GaussianGrad)) == 0;
}

double
maxAbsDiff(const Image &a, const Image &b) {
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

Gaussian
isotropic(const Vec3 &p, double s, double opacity, const Vec3 &color) {
    Gaussian g;
    g.position = g.anchor = p;
    g.scale = {s, s, s};
    g.rotation = {1, 0, 0, 0};
    g.opacity = opacity;
    g.color = color;
    g.uv = {0.5, 0.5};
    return g;
}

Image
randomImage(std::mt19937_64 &rng, int w, int h, int c) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Image img(w, h, c);
    for (double &v : img.data)
        v = u(rng);
    return img;
}

} // namespace

TEST(Project, IsotropicOnAxis) {
    Camera cam;
    cam.fx = cam.fy = 200.0;
    cam.cx = cam.cy = 31.5;
    cam.width = cam.height = 64;
    cam.translation = {0, 0, 1.0};
    const double s = 0.02;
    const auto p = projectGaussian(isotropic({0, 0, 0}, s, 0.5, {}), cam);
    ASSERT_TRUE(p);
    EXPECT_NEAR(p->cov.xx, (200.0 * s) * (200.0 * s) + 0.3, 1e-12);
    EXPECT_NEAR(p->cov.yy, (200.0 * s) * (200.0 * s) + 0.3, 1e-12);
    EXPECT_NEAR(p->cov.xy, 0.0, 1e-12);
    EXPECT_NEAR(p->mean.x, 31.5, 1e-12);
    EXPECT_DOUBLE_EQ(p->depth, 1.0);
}

TEST(Project, CovarianceMatchesSampledPointCloud) {
    // Project samples of an anisotropic off-axis Gaussian through the pinhole
    // and compare their empirical covariance with the EWA approximation.
    Camera cam;
    cam.fx = 300.0;
    cam.fy = 250.0;
    cam.cx = cam.cy = 63.5;
    cam.width = cam.height = 128;
    cam.translation = {0, 0, 2.0};
    std::mt19937_64 rng(21);
    Gaussian g = isotropic({0.2, -0.1, 0.1}, 0.0, 0.5, {});
    g.scale = {0.01, 0.004, 0.007};
    g.rotation = randomUnitQuat(rng);
    const auto p = projectGaussian(g, cam);
    ASSERT_TRUE(p);

    const Mat3 Sigma = gaussianCovariance(g.scale, g.rotation);
    // Cholesky of Sigma for sampling.
    double L[3][3] = {};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j <= i; ++j) {
            double sum = Sigma(i, j);
            for (int k = 0; k < j; ++k)
                sum -= L[i][k] * L[j][k];
            L[i][j] = i == j ? std::sqrt(sum) : sum / L[j][j];
        }
    std::normal_distribution<double> n(0.0, 1.0);
    const int count = 200000;
    double mx = 0, my = 0, sxx = 0, sxy = 0, syy = 0;
    std::vector<std::pair<double, double>> pts(count);
    for (auto &pt : pts) {
        const double z[3] = {n(rng), n(rng), n(rng)};
        Vec3 w = g.position;
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k <= i; ++k)
                w[i] += L[i][k] * z[k];
        const Vec3 c = cam.toCamera(w);
        pt = {cam.fx * c.x / c.z + cam.cx, cam.fy * c.y / c.z + cam.cy};
        mx += pt.first;
        my += pt.second;
    }
    mx /= count;
    my /= count;
    for (const auto &pt : pts) {
        sxx += (pt.first - mx) * (pt.first - mx);
        sxy += (pt.first - mx) * (pt.second - my);
        syy += (pt.second - my) * (pt.second - my);
    }
    sxx /= count - 1;
    sxy /= count - 1;
    syy /= count - 1;
    EXPECT_NEAR(p->cov.xx - 0.3, sxx, 0.02 * sxx);
    EXPECT_NEAR(p->cov.yy - 0.3, syy, 0.02 * syy);
    EXPECT_NEAR(p->cov.xy, sxy, 0.02 * std::sqrt(sxx * syy));
    EXPECT_NEAR(p->mean.x, mx, 0.05);
    EXPECT_NEAR(p->mean.y, my, 0.05);
}

TEST(Project, CullsBehindCamera) {
    Camera cam;
    cam.fx = cam.fy = 100.0;
    cam.width = cam.height = 16;
    cam.translation = {0, 0, 0.005};
    EXPECT_FALSE(projectGaussian(isotropic({0, 0, 0}, 0.01, 0.5, {}), cam));
    cam.translation = {0, 0, -1.0};
    EXPECT_FALSE(projectGaussian(isotropic({0, 0, 0}, 0.01, 0.5, {}), cam));
}

TEST(Project, IdentityRotationCovariance) {
    const Mat3 S = gaussianCovariance({0.3, 0.3, 0.3}, {1, 0, 0, 0});
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            EXPECT_NEAR(S(i, j), i == j ? 0.09 : 0.0, 1e-15);
}

TEST(Render, EmptySceneIsBackground) {
    const Camera cam = frontCamera(12, 20.0);
    const RenderOutput out = render(GaussianSet{}, cam, RenderMode::Color, {0.2, 0.4, 0.6});
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x) {
            EXPECT_EQ(out.color.at(x, y, 0), 0.2);
            EXPECT_EQ(out.color.at(x, y, 2), 0.6);
            EXPECT_EQ(out.alpha.at(x, y), 0.0);
            EXPECT_EQ(out.depth.at(x, y), 0.0);
        }
}

TEST(Render, ClampedBlackSplatOverWhite) {
    const Camera cam = frontCamera(15, 30.0);
    GaussianSet gs;
    gs.gaussians.push_back(isotropic({0, 0, 0}, 0.05, 0.999, {0, 0, 0}));
    const RenderOutput out = render(gs, cam, RenderMode::Color, {1, 1, 1});
    EXPECT_NEAR(out.color.at(7, 7, 0), 0.01, 1e-12);
    EXPECT_NEAR(out.alpha.at(7, 7), 0.99, 1e-12);
}

TEST(Render, TwoOverlappingSplatsFollowTheOverOperator) {
    const Camera cam = frontCamera(15, 30.0);
    const Gaussian a = isotropic({0, 0, -0.2}, 0.05, 0.6, {1, 0, 0});
    const Gaussian b = isotropic({0, 0, 0.2}, 0.05, 0.7, {0, 0, 1});
    const Vec3 bg{0.5, 0.5, 0.5};
    const GaussianSet gs{{a, b}};
    const RenderOutput out = render(gs, cam, RenderMode::Color, bg);
    // Both centres project onto pixel (7, 7) where the Gaussian factor is 1.
    EXPECT_NEAR(out.color.at(7, 7, 0), 0.6 + 0.4 * 0.3 * 0.5, 1e-12);
    EXPECT_NEAR(out.color.at(7, 7, 2), 0.4 * 0.7 + 0.4 * 0.3 * 0.5, 1e-12);
    EXPECT_NEAR(out.alpha.at(7, 7), 1.0 - 0.4 * 0.3, 1e-12);

    Gaussian a2 = a, b2 = b;
    std::swap(a2.position, b2.position);
    const RenderOutput swapped = render(GaussianSet{{a2, b2}}, cam, RenderMode::Color, bg);
    EXPECT_NEAR(swapped.color.at(7, 7, 0), 0.3 * 0.6 + 0.3 * 0.4 * 0.5, 1e-12);
    EXPECT_NEAR(swapped.color.at(7, 7, 2), 0.7 + 0.3 * 0.4 * 0.5, 1e-12);
}

TEST(Render, DepthOfSingleSplat) {
    const Camera cam = frontCamera(15, 30.0);
    GaussianSet gs;
    gs.gaussians.push_back(isotropic({0, 0, 0.3}, 0.04, 0.7, {0.2, 0.2, 0.2}));
    const RenderOutput out = render(gs, cam, RenderMode::Color, {1, 1, 1});
    EXPECT_NEAR(out.depth.at(7, 7), 1.8, 1e-3);
}

TEST(Render, InvalidBackgroundThrows) {
    const Camera cam = frontCamera(8, 10.0);
    for (Vec3 bg : {Vec3{-0.1, 0, 0}, Vec3{0, 1.5, 0}, Vec3{0, 0, std::nan("")}}) {
        try {
            render(GaussianSet{}, cam, RenderMode::Color, bg);
            FAIL();
        } catch (const Error &e) {
            EXPECT_EQ(e.kind(), ErrorKind::InvalidBackground);
        }
    }
}

TEST(Render, MatchesBruteForceOracle) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        RandomSceneSpec spec;
        spec.count = 1 + trial % 5;
        if (trial >= 10)
            spec.count = 40, spec.maxOpacity = 0.999;
        const GaussianSet gs = randomScene(rng, spec);
        const Camera cam = frontCamera(40, 70.0);
        for (RenderMode mode : {RenderMode::Color, RenderMode::UvCoords}) {
            const RenderOutput out = render(gs, cam, mode, {0.3, 0.6, 0.9});
            const OracleFrame ref = oracleRender(gs, cam, mode, {0.3, 0.6, 0.9});
            EXPECT_LT(maxAbsDiff(out.color, ref.color), 1e-9) << "trial " << trial;
            EXPECT_LT(maxAbsDiff(out.alpha, ref.alpha), 1e-9) << "trial " << trial;
            EXPECT_LT(maxAbsDiff(out.depth, ref.depth), 1e-9) << "trial " << trial;
        }
    }
}

TEST(Render, PropertiesOnRandomScenes) {
    std::mt19937_64 rng(41);
    const Camera cam = frontCamera(48, 80.0);
    for (int trial = 0; trial < 10; ++trial) {
        RandomSceneSpec spec;
        spec.count = 30;
        spec.maxOpacity = 0.99;
        GaussianSet gs = randomScene(rng, spec);
        const Vec3 bg{0.25, 0.5, 1.0};
        const RenderOutput out = render(gs, cam, RenderMode::Color, bg);
        const RenderOutput black = render(gs, cam, RenderMode::Color, {0, 0, 0});
        const RenderOutput uv = render(gs, cam, RenderMode::UvCoords, bg);
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) {
                const double a = out.alpha.at(x, y);
                EXPECT_GE(a, 0.0);
                EXPECT_LE(a, 1.0);
                for (int c = 0; c < 3; ++c)
                    EXPECT_NEAR(out.color.at(x, y, c), black.color.at(x, y, c) + (1 - a) * bg[c],
                                1e-12);
            }
        EXPECT_TRUE(bitwiseEqual(out.alpha, uv.alpha));

        std::vector<Gaussian> shuffled = gs.gaussians;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const RenderOutput perm = render(GaussianSet{shuffled}, cam, RenderMode::Color, bg);
        EXPECT_LT(maxAbsDiff(out.color, perm.color), 1e-6);
        EXPECT_LT(maxAbsDiff(out.alpha, perm.alpha), 1e-6);
    }
}

TEST(Render, TilingThreadsAndReferenceAreBitwiseIdentical) {
    std::mt19937_64 rng(51);
    RandomSceneSpec spec;
    spec.count = 60;
    const GaussianSet gs = randomScene(rng, spec);
    const Camera cam = lookAtCamera({0.3, -0.2, -1.4}, {0, 0, 0}, {0, -1, 0}, 90.0, 70, 53);
    const Vec3 bg{1, 1, 1};
    const Image gc = randomImage(rng, cam.width, cam.height, 3);
    const Image ga = randomImage(rng, cam.width, cam.height, 1);

    const RenderOutput base = reference::render(gs, cam, RenderMode::Color, bg);
    const SplatGradients baseGrad = reference::renderBackward(gs, cam, RenderMode::Color, bg, gc, ga);
    const int savedThreads = threadCount();
    for (int threads : {1, 2, 4}) {
        setThreadCount(threads);
        for (int tile : {8, 16, 32}) {
            RenderOptions opts;
            opts.tileSize = tile;
            FrameState state;
            const RenderOutput out = render(gs, cam, RenderMode::Color, bg, opts, &state);
            EXPECT_TRUE(bitwiseEqual(out.color, base.color)) << threads << "/" << tile;
            EXPECT_TRUE(bitwiseEqual(out.alpha, base.alpha)) << threads << "/" << tile;
            EXPECT_TRUE(bitwiseEqual(out.depth, base.depth)) << threads << "/" << tile;
            const SplatGradients g1 = renderBackward(gs, cam, RenderMode::Color, bg, gc, ga, opts);
            const SplatGradients g2 =
                renderBackward(gs, cam, RenderMode::Color, bg, gc, ga, opts, &state);
            EXPECT_TRUE(bitwiseEqual(g1, g2));
            for (size_t i = 0; i < g1.size(); ++i) {
                const GaussianGrad &a = g1[i], &b = baseGrad[i];
                const double scale = std::max(1.0, norm(b.position));
                EXPECT_NEAR(a.position.x, b.position.x, 1e-12 * scale);
                EXPECT_NEAR(a.opacity, b.opacity, 1e-12 * std::max(1.0, std::abs(b.opacity)));
            }
            if (threads > 1 || tile != 16)
                continue;
        }
    }
    // Thread count must not change tiled gradients bitwise.
    setThreadCount(1);
    const SplatGradients one = renderBackward(gs, cam, RenderMode::Color, bg, gc, ga);
    setThreadCount(3);
    const SplatGradients three = renderBackward(gs, cam, RenderMode::Color, bg, gc, ga);
    EXPECT_TRUE(bitwiseEqual(one, three));
    setThreadCount(savedThreads);
}

TEST(RenderBackward, ZeroUpstreamGivesZeroGradients) {
    std::mt19937_64 rng(61);
    const GaussianSet gs = randomScene(rng);
    const Camera cam = frontCamera(32, 60.0);
    const SplatGradients g = renderBackward(gs, cam, RenderMode::Color, {1, 1, 1},
                                            Image(32, 32, 3), Image(32, 32, 1));
    ASSERT_EQ(g.size(), gs.size());
    for (const GaussianGrad &x : g) {
        EXPECT_EQ(x.opacity, 0.0);
        EXPECT_EQ(norm(x.position), 0.0);
        EXPECT_EQ(norm(x.scale), 0.0);
        EXPECT_EQ(norm(x.color), 0.0);
    }
}

TEST(RenderBackward, SingleSplatColorGradientIsAlpha) {
    const Camera cam = frontCamera(15, 30.0);
    GaussianSet gs;
    gs.gaussians.push_back(isotropic({0.01, -0.02, 0}, 0.05, 0.6, {0.3, 0.4, 0.5}));
    const RenderOutput out = render(gs, cam, RenderMode::Color, {1, 1, 1});
    Image gc(15, 15, 3);
    gc.at(7, 7, 0) = 1.0;
    const SplatGradients g =
        renderBackward(gs, cam, RenderMode::Color, {1, 1, 1}, gc, Image(15, 15, 1));
    EXPECT_NEAR(g[0].color.x, out.alpha.at(7, 7), 1e-12);
    EXPECT_EQ(g[0].color.y, 0.0);
    EXPECT_EQ(g[0].color.z, 0.0);
}

TEST(RenderBackward, CulledGaussiansGetZeros) {
    const Camera cam = frontCamera(16, 30.0);
    GaussianSet gs;
    gs.gaussians.push_back(isotropic({0, 0, 0}, 0.05, 0.6, {0.3, 0.4, 0.5}));
    gs.gaussians.push_back(isotropic({0, 0, -3.0}, 0.05, 0.6, {0.3, 0.4, 0.5})); // behind
    gs.gaussians.push_back(isotropic({5.0, 0, 0}, 0.05, 0.6, {0.3, 0.4, 0.5}));  // off-screen
    std::mt19937_64 rng(62);
    const SplatGradients g = renderBackward(gs, cam, RenderMode::Color, {1, 1, 1},
                                            randomImage(rng, 16, 16, 3), randomImage(rng, 16, 16, 1));
    EXPECT_NE(g[0].opacity, 0.0);
    for (int i : {1, 2}) {
        EXPECT_EQ(g[i].opacity, 0.0);
        EXPECT_EQ(norm(g[i].position), 0.0);
        EXPECT_EQ(norm(g[i].scale), 0.0);
    }
}

TEST(RenderBackward, ShapeMismatchThrows) {
    const Camera cam = frontCamera(16, 30.0);
    try {
        renderBackward(GaussianSet{}, cam, RenderMode::Color, {1, 1, 1}, Image(16, 15, 3),
                       Image(16, 16, 1));
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
    }
}

TEST(RenderBackward, MatchesFiniteDifferences) {
    std::mt19937_64 rng(71);
    GradCheckStats total;
    for (int trial = 0; trial < 10; ++trial) {
        RandomSceneSpec spec;
        spec.count = 8 + 3 * trial; // up to 35 -> clamp below
        spec.count = std::min(spec.count, 32);
        spec.maxOpacity = trial % 3 == 0 ? 0.995 : 0.8;
        const GaussianSet gs = randomScene(rng, spec);
        const Camera cam = frontCamera(32, 60.0);
        const RenderMode mode = trial % 4 == 3 ? RenderMode::UvCoords : RenderMode::Color;
        const GradCheckStats s = checkRenderGradients(gs, cam, mode, {0.9, 0.6, 0.3}, rng);
        EXPECT_EQ(s.failed, 0u) << "trial " << trial << " worst " << s.worst << " at "
                                << s.worstWhere;
        total.merge(s);
    }
    EXPECT_GT(total.checked, 2000u);
    EXPECT_GT(total.straddling, 0u); // the frozen-branch path is exercised
}

TEST(DepthNormals, FrontoParallelPlane) {
    const Camera cam = frontCamera(48, 80.0);
    GaussianSet gs;
    for (int j = -12; j <= 12; ++j)
        for (int i = -12; i <= 12; ++i) {
            Gaussian g = isotropic({i * 0.02, j * 0.02, 0.0}, 0.0, 0.9, {0.5, 0.5, 0.5});
            g.scale = {0.02, 0.02, 0.001};
            gs.gaussians.push_back(g);
        }
    const DepthNormals dn = renderDepthNormals(gs, cam);
    int checked = 0;
    for (int y = 14; y < 34; ++y)
        for (int x = 14; x < 34; ++x) {
            EXPECT_NEAR(dn.normals.at(x, y, 0), 0.0, 0.05);
            EXPECT_NEAR(dn.normals.at(x, y, 1), 0.0, 0.05);
            EXPECT_NEAR(dn.normals.at(x, y, 2), -1.0, 0.05);
            EXPECT_NEAR(dn.depth.at(x, y), 1.5, 1e-6);
            ++checked;
        }
    EXPECT_EQ(checked, 400);
    // Corners are uncovered.
    EXPECT_EQ(dn.normals.at(0, 0, 2), 0.0);
}

TEST(DepthNormals, EmptySceneHasZeroNormals) {
    const DepthNormals dn = renderDepthNormals(GaussianSet{}, frontCamera(8, 10.0));
    for (double v : dn.normals.data)
        EXPECT_EQ(v, 0.0);
}
