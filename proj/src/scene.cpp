// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
#include "uvsplat/scene.hpp"

#include "uvsplat/error.hpp"

namespace uvsplat {

LoadedScene
loadScene(const SceneBundle &bundle) {
    if (bundle.uvResolution < 1)
        throw Error(ErrorKind::InvalidConfig, "uv resolution must be >= 1");
    bundle.activation.validate();
    LoadedScene scene;
    scene.mesh = std::make_shared<const TemplateMesh>(loadObj(bundle.templatePath));
    scene.index = std::make_unique<UvChartIndex>(scene.mesh);
    scene.grid = sampleUvGrid(*scene.index, bundle.uvResolution);
    scene.maps = loadGguv(bundle.mapsPath);
    scene.gaussians = assembleGaussians(scene.maps, scene.grid, bundle.activation);
    return scene;
}

} // namespace uvsplat
