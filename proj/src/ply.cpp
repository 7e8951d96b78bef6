// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
#include "uvsplat/ply.hpp"

#include "binary_io.hpp"
#include "uvsplat/error.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

namespace uvsplat {

namespace {

constexpr std::array<const char *, 14> kProperties = {
    "x",       "y",       "z",       "f_dc_0", "f_dc_1", "f_dc_2", "opacity",
    "scale_0", "scale_1", "scale_2", "rot_0",  "rot_1",  "rot_2",  "rot_3"};

} // namespace

void
writePly(std::ostream &out, const GaussianSet &gaussians) {
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << gaussians.size() << '\n';
    for (const char *name : kProperties)
        out << "property float " << name << '\n';
    out << "end_header\n";
    for (const Gaussian &g : gaussians.gaussians) {
        const std::array<double, 14> row = {g.position.x,
                                            g.position.y,
                                            g.position.z,
                                            (g.color.x - 0.5) / kShC0,
                                            (g.color.y - 0.5) / kShC0,
                                            (g.color.z - 0.5) / kShC0,
                                            std::log(g.opacity) - std::log1p(-g.opacity),
                                            std::log(g.scale.x),
                                            std::log(g.scale.y),
                                            std::log(g.scale.z),
                                            g.rotation.w,
                                            g.rotation.x,
                                            g.rotation.y,
                                            g.rotation.z};
        for (double v : row)
            detail::writeLe<float>(out, float(v));
    }
    if (!out)
        throw Error(ErrorKind::IoError, "failed writing PLY stream");
}

GaussianSet
readPly(std::istream &in) {
    std::string line;
    if (!std::getline(in, line) || line != "ply")
        throw Error(ErrorKind::BadFormat, "missing 'ply' magic line");
    size_t count = 0;
    size_t prop = 0;
    bool binaryLe = false;
    while (std::getline(in, line)) {
        if (line == "end_header")
            break;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "format") {
            std::string fmt;
            ls >> fmt;
            binaryLe = fmt == "binary_little_endian";
        } else if (tag == "element") {
            std::string name;
            ls >> name >> count;
            if (name != "vertex")
                throw Error(ErrorKind::BadFormat, "unexpected PLY element '" + name + "'");
        } else if (tag == "property") {
            std::string type, name;
            ls >> type >> name;
            if (prop >= kProperties.size() || type != "float" || name != kProperties[prop])
                throw Error(ErrorKind::BadFormat, "unexpected PLY property '" + name + "'");
            ++prop;
        }
    }
    if (!binaryLe || prop != kProperties.size())
        throw Error(ErrorKind::BadFormat, "PLY header does not match the Gaussian layout");

    GaussianSet out;
    out.gaussians.resize(count);
    for (Gaussian &g : out.gaussians) {
        std::array<double, 14> row{};
        for (double &v : row)
            v = detail::readLe<float>(in, "PLY vertex data");
        g.position = {row[0], row[1], row[2]};
        g.color = {row[3] * kShC0 + 0.5, row[4] * kShC0 + 0.5, row[5] * kShC0 + 0.5};
        g.opacity = sigmoid(row[6]);
        g.scale = {std::exp(row[7]), std::exp(row[8]), std::exp(row[9])};
        g.rotation = {row[10], row[11], row[12], row[13]};
        g.uv = {};
        g.anchor = {};
    }
    return out;
}

void
exportPly(const std::string &path, const GaussianSet &gaussians) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorKind::IoError, "cannot create '" + path + "'");
    writePly(out, gaussians);
}

GaussianSet
importPly(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
    return readPly(in);
}

} // namespace uvsplat
