// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "uvsplat/attribute_maps.hpp"
#include "uvsplat/mesh.hpp"

#include <memory>
#include <string>

namespace uvsplat {

struct SceneBundle {
    std::string templatePath;
    std::string mapsPath;
    ActivationConfig activation;
    int uvResolution = 64;
    Vec3 background{1.0, 1.0, 1.0};
};

/// Everything needed to render a bundle.
struct LoadedScene {
    std::shared_ptr<const TemplateMesh> mesh;
    std::unique_ptr<UvChartIndex> index;
    UvGrid grid;
    AttributeMaps maps;
    GaussianSet gaussians;
};

/// Throws IoError / BadFormat / MalformedRecord / InvalidConfig.
LoadedScene loadScene(const SceneBundle &bundle);

} // namespace uvsplat
