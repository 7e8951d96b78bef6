// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//

#include "scenes.hpp"
#include "tempdir.hpp"

#include "uvsplat/camera.hpp"
#include "uvsplat/error.hpp"
#include "uvsplat/image.hpp"
#include "uvsplat/ply.hpp"
#include "uvsplat/scene.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

using namespace uvsplat;
using namespace uvsplat::testing;

namespace {

double
rel(double a, double b) {
    const double d = std::max(std::abs(a), std::abs(b));
    return d > 0 ? std::abs(a - b) / d : 0.0;
}

} // namespace

TEST(Ply, RoundTripKeepsAttributes) {
    std::mt19937_64 rng(1);
    RandomSceneSpec spec;
    spec.count = 500;
    spec.minOpacity = 0.001;
    spec.maxOpacity = 0.999;
    spec.minScale = 1e-5;
    spec.maxScale = 0.05;
    const GaussianSet gs = randomScene(rng, spec);
    std::stringstream buf;
    writePly(buf, gs);
    const GaussianSet back = readPly(buf);
    ASSERT_EQ(back.size(), gs.size());
    for (size_t i = 0; i < gs.size(); ++i) {
        const Gaussian &a = gs.gaussians[i], &b = back.gaussians[i];
        for (int k = 0; k < 3; ++k) {
            EXPECT_LT(rel(a.position[k], b.position[k]), 1e-6);
            EXPECT_LT(rel(a.scale[k], b.scale[k]), 1e-6);
            // Colours are stored as (c - 0.5) / C0 in float32, an absolute
            // quantization of about 3e-8 on [0,1].
            EXPECT_LT(std::abs(a.color[k] - b.color[k]), 1e-6 * std::max(1.0, std::abs(a.color[k])));
        }
        for (int k = 0; k < 4; ++k)
            EXPECT_LT(rel(a.rotation[k], b.rotation[k]), 1e-6);
        EXPECT_LT(rel(a.opacity, b.opacity), 1e-6);
    }
}

TEST(Ply, HeaderLayoutAndDefaults) {
    const UvChartIndex index(std::make_shared<const TemplateMesh>(makeUvSphere(0.2, 10, 6)));
    const UvGrid grid = sampleUvGrid(index, 8);
    const GaussianSet gs = assembleGaussians(AttributeMaps(4, 4), grid, ActivationConfig{});
    std::stringstream buf;
    writePly(buf, gs);
    const std::string text = buf.str();
    EXPECT_EQ(text.rfind("ply\nformat binary_little_endian 1.0\nelement vertex " +
                             std::to_string(gs.size()) + "\n",
                         0),
              0u);
    const std::string names[] = {"x",       "y",       "z",       "f_dc_0", "f_dc_1",
                                 "f_dc_2",  "opacity", "scale_0", "scale_1", "scale_2",
                                 "rot_0",   "rot_1",   "rot_2",   "rot_3"};
    size_t pos = 0;
    for (const std::string &n : names) {
        pos = text.find("property float " + n + "\n", pos);
        ASSERT_NE(pos, std::string::npos) << n;
    }
    const size_t body = text.find("end_header\n") + 11;
    ASSERT_EQ(text.size() - body, gs.size() * 14 * 4);
    for (size_t i = 0; i < gs.size(); ++i) {
        float opacity = 0, fdc = 0, scale = 0;
        std::memcpy(&opacity, &text[body + (i * 14 + 6) * 4], 4);
        std::memcpy(&fdc, &text[body + (i * 14 + 3) * 4], 4);
        std::memcpy(&scale, &text[body + (i * 14 + 7) * 4], 4);
        EXPECT_EQ(opacity, 0.0f);
        EXPECT_EQ(fdc, 0.0f);
        EXPECT_NEAR(scale, -3.0 - std::log(1.0 + std::exp(2.0)), 1e-6);
    }
}

TEST(Ply, RejectsForeignLayouts) {
    std::istringstream notPly("obj\n");
    EXPECT_THROW(readPly(notPly), Error);
    std::istringstream ascii("ply\nformat ascii 1.0\nelement vertex 0\nend_header\n");
    EXPECT_THROW(readPly(ascii), Error);
    std::istringstream shortBody("ply\nformat binary_little_endian 1.0\nelement vertex 2\n"
                                 "property float x\nend_header\n");
    EXPECT_THROW(readPly(shortBody), Error);
}

TEST(CameraJson, RoundTripAndErrors) {
    const Camera cam = lookAtCamera({0.3, 0.4, -2.0}, {0, 0.1, 0}, {0, -1, 0}, 123.0, 40, 30);
    const Camera back = cameraFromJson(cameraToJson(cam));
    EXPECT_EQ(back.fx, cam.fx);
    EXPECT_EQ(back.cy, cam.cy);
    EXPECT_EQ(back.width, 40);
    EXPECT_EQ(back.height, 30);
    for (int r = 0; r < 3; ++r) {
        EXPECT_EQ(back.translation[r], cam.translation[r]);
        for (int c = 0; c < 3; ++c)
            EXPECT_EQ(back.rotation(r, c), cam.rotation(r, c));
    }
    auto kindOf = [](const std::string &text) {
        try {
            cameraFromJson(text);
        } catch (const Error &e) {
            return e.kind();
        }
        return ErrorKind::IoError;
    };
    const std::string eye = R"("world_to_camera": [1,0,0,0, 0,1,0,0, 0,0,1,2, 0,0,0,1])";
    EXPECT_EQ(kindOf(R"({"fx": 1, "fy": 1, "cx": 0, "cy": 0, "width": 4, "height": 4, )" + eye + "}"),
              ErrorKind::IoError); // valid, nothing thrown
    EXPECT_EQ(kindOf(R"({"fx": -1, "fy": 1, "cx": 0, "cy": 0, "width": 4, "height": 4, )" + eye + "}"),
              ErrorKind::InvalidCamera);
    EXPECT_EQ(kindOf(R"({"fx": 1, "fy": 1, "cx": 0, "cy": 0, "width": 4, "height": 4, "znear": 2, "zfar": 1, )" +
                     eye + "}"),
              ErrorKind::InvalidCamera);
    EXPECT_EQ(kindOf(R"({"fx": 1, "fy": 1, "cx": 0, "cy": 0, "width": 4, "height": 4, "world_to_camera": [1, 2]})"),
              ErrorKind::InvalidCamera);
    EXPECT_EQ(kindOf(R"({"fx": 1})"), ErrorKind::InvalidCamera);
}

TEST(Camera, LookAtConventions) {
    const Camera cam = lookAtCamera({0, 0, -1.5}, {0, 0, 0}, {0, -1, 0}, 50.0, 21, 11);
    const Vec3 c = cam.center();
    EXPECT_NEAR(c.z, -1.5, 1e-12);
    EXPECT_DOUBLE_EQ(cam.cx, 10.0);
    EXPECT_DOUBLE_EQ(cam.cy, 5.0);
    const Vec3 p = cam.toCamera({0, 0, 0});
    EXPECT_NEAR(p.z, 1.5, 1e-12);
    // +y in the world is "down" in this camera (up was given as -y).
    EXPECT_GT(cam.toCamera({0, 1, 0}).y, 0.0);
}

TEST(Camera, OrbitFramesAreEvenlySpaced) {
    OrbitSpec spec;
    spec.center = {0.1, 0.0, 0.0};
    spec.radius = 2.0;
    spec.frames = 4;
    const std::vector<Camera> cams = orbitCameras(spec);
    ASSERT_EQ(cams.size(), 4u);
    for (size_t i = 0; i < 4; ++i) {
        const Vec3 a = cams[i].center() - spec.center;
        const Vec3 b = cams[(i + 1) % 4].center() - spec.center;
        EXPECT_NEAR(norm(a), 2.0, 1e-12);
        EXPECT_NEAR(dot(a, b), 0.0, 1e-9); // 90 degrees apart
        EXPECT_NEAR(a.y, 0.0, 1e-12);
        const Vec3 centre = cams[i].toCamera(spec.center);
        EXPECT_NEAR(centre.x, 0.0, 1e-12);
        EXPECT_NEAR(centre.y, 0.0, 1e-12);
    }
    spec.radius = 0.0;
    EXPECT_THROW(orbitCameras(spec), Error);
}

TEST(Images, PfmRoundTripIsFloatExact) {
    TempDir dir("io");
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int ch : {1, 3}) {
        Image img(7, 5, ch);
        for (double &v : img.data)
            v = u(rng);
        const std::string path = dir.file("img" + std::to_string(ch) + ".pfm");
        writePfm(path, img);
        const Image back = readImage(path);
        ASSERT_TRUE(back.sameShape(img));
        for (size_t i = 0; i < img.data.size(); ++i)
            EXPECT_EQ(back.data[i], double(float(img.data[i])));
    }
    std::ofstream(dir.file("bad.pfm")) << "PX\n1 1\n-1\n";
    EXPECT_THROW(readPfm(dir.file("bad.pfm")), Error);
}

TEST(Images, PngRoundTripQuantizes) {
    TempDir dir("io");
    Image img(9, 4, 3);
    for (size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = double(i % 256) / 255.0;
    img.data[0] = -0.5;
    img.data[1] = 7.0;
    const std::string path = dir.file("a.png");
    writePng(path, img);
    const Image back = readImage(path);
    ASSERT_TRUE(back.sameShape(img));
    EXPECT_EQ(back.data[0], 0.0);
    EXPECT_EQ(back.data[1], 1.0);
    for (size_t i = 2; i < img.data.size(); ++i)
        EXPECT_NEAR(back.data[i], img.data[i], 1e-12);
    EXPECT_THROW(readImage(dir.file("missing.png")), Error);
    EXPECT_THROW(readImage(dir.file("x.bmp")), Error);
}

TEST(Scene, LoadsTemplateAndMaps) {
    TempDir dir("io");
    {
        std::ofstream obj(dir.file("sphere.obj"));
        writeObj(obj, makeUvSphere(0.3, 12, 7));
    }
    AttributeMaps maps(6, 6);
    paintProceduralTexture(maps);
    saveGguv(dir.file("maps.gguv"), maps);
    SceneBundle b;
    b.templatePath = dir.file("sphere.obj");
    b.mapsPath = dir.file("maps.gguv");
    b.uvResolution = 10;
    const LoadedScene s = loadScene(b);
    EXPECT_EQ(s.gaussians.size(), s.grid.validCount());
    EXPECT_EQ(s.grid.resolution, 10);
    b.mapsPath = dir.file("nope.gguv");
    EXPECT_THROW(loadScene(b), Error);
}
