// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
// Binary little-endian PLY in the layout common 3DGS viewers read:
// x y z f_dc_0..2 opacity scale_0..2 rot_0..3, all float32. Colour is stored
// as a degree-0 SH coefficient, opacity as a logit and scales as logs.
#pragma once

#include "uvsplat/attribute_maps.hpp"

#include <iosfwd>
#include <string>

namespace uvsplat {

inline constexpr double kShC0 = 0.28209479177387814;

void writePly(std::ostream &out, const GaussianSet &gaussians);
/// Reads the layout written by writePly. UV and anchor fields are zero.
GaussianSet readPly(std::istream &in);

void exportPly(const std::string &path, const GaussianSet &gaussians);
GaussianSet importPly(const std::string &path);

} // namespace uvsplat
