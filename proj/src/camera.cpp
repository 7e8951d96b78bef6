// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
#include "uvsplat/camera.hpp"

#include "uvsplat/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace uvsplat {

void
Camera::validate() const {
    if (!(fx > 0.0 && fy > 0.0))
        throw Error(ErrorKind::InvalidCamera, "focal lengths must be positive");
    if (!(znear > 0.0 && znear < zfar))
        throw Error(ErrorKind::InvalidCamera, "need 0 < znear < zfar");
    if (width < 1 || height < 1)
        throw Error(ErrorKind::InvalidCamera, "image size must be at least 1x1");
}

Vec3
Camera::center() const {
    const Vec3 rt = transpose(rotation) * translation;
    return {-rt.x, -rt.y, -rt.z};
}

Camera
lookAtCamera(const Vec3 &eye, const Vec3 &target, const Vec3 &up, double focal, int width,
             int height) {
    Vec3 forward = target - eye;
    const double fn = norm(forward);
    if (!(fn > 0.0))
        throw Error(ErrorKind::InvalidCamera, "eye and target coincide");
    forward = (1.0 / fn) * forward;
    // Image y points down, so "down" is -up projected off the view axis.
    Vec3 right = cross(forward, up);
    const double rn = norm(right);
    if (!(rn > 1e-12))
        throw Error(ErrorKind::InvalidCamera, "view direction parallel to up vector");
    right = (1.0 / rn) * right;
    const Vec3 down = cross(forward, right);

    Camera cam;
    for (int c = 0; c < 3; ++c) {
        cam.rotation(0, c) = right[c];
        cam.rotation(1, c) = down[c];
        cam.rotation(2, c) = forward[c];
    }
    const Vec3 re = cam.rotation * eye;
    cam.translation = {-re.x, -re.y, -re.z};
    cam.fx = cam.fy = focal;
    cam.width = width;
    cam.height = height;
    cam.cx = 0.5 * (width - 1);
    cam.cy = 0.5 * (height - 1);
    cam.validate();
    return cam;
}

std::vector<Camera>
orbitCameras(const OrbitSpec &spec) {
    if (!(spec.radius > 0.0))
        throw Error(ErrorKind::InvalidConfig, "orbit radius must be positive");
    if (spec.frames < 1)
        throw Error(ErrorKind::InvalidConfig, "orbit needs at least one frame");
    // Orthonormal frame around the up axis.
    Vec3 up = (1.0 / norm(spec.up)) * spec.up;
    Vec3 helper = std::abs(up.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
    Vec3 a = cross(up, helper);
    a = (1.0 / norm(a)) * a;
    const Vec3 b = cross(a, up);

    std::vector<Camera> cams;
    for (int t = 0; t < spec.frames; ++t) {
        const double phi = 2.0 * std::numbers::pi * t / spec.frames;
        const double horiz = spec.radius * std::cos(spec.elevation);
        const Vec3 eye = spec.center + horiz * std::cos(phi) * b + horiz * std::sin(phi) * a +
                         spec.radius * std::sin(spec.elevation) * up;
        cams.push_back(lookAtCamera(eye, spec.center, up, spec.focal, spec.width, spec.height));
    }
    return cams;
}

std::string
cameraToJson(const Camera &cam) {
    nlohmann::json j;
    j["fx"] = cam.fx;
    j["fy"] = cam.fy;
    j["cx"] = cam.cx;
    j["cy"] = cam.cy;
    j["width"] = cam.width;
    j["height"] = cam.height;
    j["znear"] = cam.znear;
    j["zfar"] = cam.zfar;
    std::vector<double> m(16, 0.0);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c)
            m[r * 4 + c] = cam.rotation(r, c);
        m[r * 4 + 3] = cam.translation[r];
    }
    m[15] = 1.0;
    j["world_to_camera"] = m;
    return j.dump(2);
}

Camera
cameraFromJson(const std::string &text) {
    Camera cam;
    try {
        const auto j = nlohmann::json::parse(text);
        cam.fx = j.at("fx").get<double>();
        cam.fy = j.at("fy").get<double>();
        cam.cx = j.at("cx").get<double>();
        cam.cy = j.at("cy").get<double>();
        cam.width = j.at("width").get<int>();
        cam.height = j.at("height").get<int>();
        cam.znear = j.value("znear", cam.znear);
        cam.zfar = j.value("zfar", cam.zfar);
        const auto m = j.at("world_to_camera").get<std::vector<double>>();
        if (m.size() != 16)
            throw Error(ErrorKind::InvalidCamera, "world_to_camera must have 16 entries");
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c)
                cam.rotation(r, c) = m[r * 4 + c];
            cam.translation[r] = m[r * 4 + 3];
        }
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorKind::InvalidCamera, std::string("camera JSON: ") + e.what());
    }
    cam.validate();
    return cam;
}

void
saveCamera(const std::string &path, const Camera &cam) {
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorKind::IoError, "cannot create '" + path + "'");
    out << cameraToJson(cam) << '\n';
}

Camera
loadCamera(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return cameraFromJson(ss.str());
}

} // namespace uvsplat
