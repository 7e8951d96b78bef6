// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "uvsplat/math.hpp"

#include <string>
#include <vector>

namespace uvsplat {

/// Pinhole camera, OpenCV convention: x right, y down, z forward. Pixel
/// (x, y) samples the image plane at exactly (x, y).
struct Camera {
    double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
    Mat3 rotation = Mat3::identity(); // world -> camera
    Vec3 translation;                 // world -> camera
    int width = 1, height = 1;
    double znear = 0.01, zfar = 100.0;

    /// Throws Error(InvalidCamera).
    void validate() const;

    Vec3 toCamera(const Vec3 &world) const { return rotation * world + translation; }
    /// Camera centre in world coordinates.
    Vec3 center() const;
    size_t pixelCount() const { return size_t(width) * height; }
};

/// Camera at `eye` looking at `target`; `up` is the world up direction.
Camera lookAtCamera(const Vec3 &eye, const Vec3 &target, const Vec3 &up, double focal, int width,
                    int height);

struct OrbitSpec {
    Vec3 center;
    double radius = 1.0;
    double elevation = 0.0; // radians above the horizontal plane
    int frames = 1;
    double focal = 100.0;
    int width = 64, height = 64;
    Vec3 up{0.0, 1.0, 0.0};
};

/// `frames` cameras evenly spaced on a horizontal circle, all looking at the centre.
std::vector<Camera> orbitCameras(const OrbitSpec &spec);

/// {fx, fy, cx, cy, width, height, znear, zfar, world_to_camera: 4x4 row-major}
std::string cameraToJson(const Camera &cam);
Camera cameraFromJson(const std::string &text);
void saveCamera(const std::string &path, const Camera &cam);
Camera loadCamera(const std::string &path);

} // namespace uvsplat
