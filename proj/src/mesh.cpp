// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
#include "uvsplat/mesh.hpp"

#include "uvsplat/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string_view>

namespace uvsplat {

void
TemplateMesh::validate() const {
    if (vertices.size() < 3 || faces.empty())
        throw Error(ErrorKind::InvalidMesh, "need at least 3 vertices and 1 face");
    if (faceUvs.size() != faces.size())
        throw Error(ErrorKind::InvalidMesh, "face UV count differs from face count");
    for (size_t f = 0; f < faces.size(); ++f) {
        for (int k = 0; k < 3; ++k) {
            if (faces[f][k] >= vertices.size())
                throw Error(ErrorKind::IndexOutOfRange,
                            "face " + std::to_string(f) + " references vertex " +
                                std::to_string(faces[f][k]));
            const Vec2 &uv = faceUvs[f][k];
            if (!(uv.x >= 0.0 && uv.x <= 1.0 && uv.y >= 0.0 && uv.y <= 1.0))
                throw Error(ErrorKind::InvalidMesh,
                            "face " + std::to_string(f) + " has a UV outside [0,1]^2");
        }
    }
}

namespace {

std::vector<std::string_view>
splitWhitespace(std::string_view line) {
    std::vector<std::string_view> out;
    size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r'))
            ++i;
        size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r')
            ++j;
        if (j > i)
            out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

[[noreturn]] void
malformed(size_t lineNo, const std::string &what) {
    throw Error(ErrorKind::MalformedRecord, "line " + std::to_string(lineNo) + ": " + what);
}

double
parseDouble(std::string_view tok, size_t lineNo) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(value))
        malformed(lineNo, "bad number '" + std::string(tok) + "'");
    return value;
}

long
parseIndex(std::string_view tok, size_t lineNo) {
    long value = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || value == 0)
        malformed(lineNo, "bad index '" + std::string(tok) + "'");
    return value;
}

// OBJ indices are 1-based, negative values count back from the end.
uint32_t
resolveIndex(long raw, size_t count, size_t lineNo, const char *what) {
    long resolved = raw > 0 ? raw - 1 : long(count) + raw;
    if (resolved < 0 || size_t(resolved) >= count)
        throw Error(ErrorKind::IndexOutOfRange, "line " + std::to_string(lineNo) + ": " + what +
                                                    " index " + std::to_string(raw) +
                                                    " out of range");
    return uint32_t(resolved);
}

} // namespace

TemplateMesh
parseObj(std::istream &in) {
    TemplateMesh mesh;
    std::vector<Vec2> texCoords;
    std::string line;
    size_t lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        std::string_view view(line);
        if (auto hash = view.find('#'); hash != std::string_view::npos)
            view = view.substr(0, hash);
        auto tokens = splitWhitespace(view);
        if (tokens.empty())
            continue;
        const std::string_view tag = tokens[0];
        if (tag == "v") {
            if (tokens.size() < 4)
                malformed(lineNo, "vertex needs 3 coordinates");
            mesh.vertices.push_back({parseDouble(tokens[1], lineNo),
                                     parseDouble(tokens[2], lineNo),
                                     parseDouble(tokens[3], lineNo)});
        } else if (tag == "vt") {
            if (tokens.size() < 3)
                malformed(lineNo, "texture coordinate needs 2 values");
            texCoords.push_back({parseDouble(tokens[1], lineNo), parseDouble(tokens[2], lineNo)});
        } else if (tag == "f") {
            if (tokens.size() < 4)
                malformed(lineNo, "face needs at least 3 corners");
            std::vector<std::pair<uint32_t, uint32_t>> corners;
            for (size_t t = 1; t < tokens.size(); ++t) {
                std::string_view tok = tokens[t];
                const size_t slash = tok.find('/');
                if (slash == std::string_view::npos)
                    throw Error(ErrorKind::MissingTexCoords,
                                "line " + std::to_string(lineNo) + ": face corner '" +
                                    std::string(tok) + "' has no texture index");
                std::string_view vtok = tok.substr(0, slash);
                std::string_view rest = tok.substr(slash + 1);
                std::string_view ttok = rest.substr(0, rest.find('/'));
                if (ttok.empty())
                    throw Error(ErrorKind::MissingTexCoords,
                                "line " + std::to_string(lineNo) + ": face corner '" +
                                    std::string(tok) + "' has no texture index");
                const uint32_t vi =
                    resolveIndex(parseIndex(vtok, lineNo), mesh.vertices.size(), lineNo, "vertex");
                const uint32_t ti =
                    resolveIndex(parseIndex(ttok, lineNo), texCoords.size(), lineNo, "texcoord");
                corners.emplace_back(vi, ti);
            }
            for (size_t k = 1; k + 1 < corners.size(); ++k) {
                const auto &a = corners[0];
                const auto &b = corners[k];
                const auto &c = corners[k + 1];
                mesh.faces.push_back({a.first, b.first, c.first});
                mesh.faceUvs.push_back({texCoords[a.second], texCoords[b.second], texCoords[c.second]});
            }
        }
        // vn, o, g, s, usemtl, mtllib and friends are ignored.
    }
    mesh.validate();
    return mesh;
}

TemplateMesh
loadObj(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
    return parseObj(in);
}

void
writeObj(std::ostream &out, const TemplateMesh &mesh) {
    out.precision(17);
    for (const auto &v : mesh.vertices)
        out << "v " << v.x << ' ' << v.y << ' ' << v.z << '\n';
    for (const auto &uvs : mesh.faceUvs)
        for (const auto &uv : uvs)
            out << "vt " << uv.x << ' ' << uv.y << '\n';
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        out << 'f';
        for (int k = 0; k < 3; ++k)
            out << ' ' << mesh.faces[f][k] + 1 << '/' << 3 * f + k + 1;
        out << '\n';
    }
}

TemplateMesh
makeUvSphere(double radius, int segments, int rings, const Vec3 &center) {
    if (segments < 3 || rings < 2 || !(radius > 0.0))
        throw Error(ErrorKind::InvalidMesh, "sphere needs segments >= 3, rings >= 2, radius > 0");
    TemplateMesh mesh;
    const int cols = segments + 1;
    for (int r = 0; r <= rings; ++r) {
        const double v = double(r) / rings;
        const double theta = v * std::numbers::pi;
        for (int s = 0; s <= segments; ++s) {
            const double u = double(s) / segments;
            const double phi = u * 2.0 * std::numbers::pi;
            mesh.vertices.push_back({center.x + radius * std::sin(theta) * std::sin(phi),
                                     center.y + radius * std::cos(theta),
                                     center.z + radius * std::sin(theta) * std::cos(phi)});
        }
    }
    auto uvOf = [&](int r, int s) { return Vec2{double(s) / segments, double(r) / rings}; };
    for (int r = 0; r < rings; ++r) {
        for (int s = 0; s < segments; ++s) {
            const uint32_t a = uint32_t(r * cols + s);
            const uint32_t b = a + 1;
            const uint32_t c = a + uint32_t(cols) + 1;
            const uint32_t d = a + uint32_t(cols);
            mesh.faces.push_back({a, b, c});
            mesh.faceUvs.push_back({uvOf(r, s), uvOf(r, s + 1), uvOf(r + 1, s + 1)});
            mesh.faces.push_back({a, c, d});
            mesh.faceUvs.push_back({uvOf(r, s), uvOf(r + 1, s + 1), uvOf(r + 1, s)});
        }
    }
    return mesh;
}

TemplateMesh
makeUnitSquare(double size) {
    TemplateMesh mesh;
    mesh.vertices = {{0, 0, 0}, {size, 0, 0}, {size, size, 0}, {0, size, 0}};
    mesh.faces = {{0, 1, 2}, {0, 2, 3}};
    mesh.faceUvs = {{Vec2{0, 0}, Vec2{1, 0}, Vec2{1, 1}}, {Vec2{0, 0}, Vec2{1, 1}, Vec2{0, 1}}};
    return mesh;
}

std::optional<std::array<double, 3>>
locateInUvTriangle(const Vec2 &p, const Vec2 &a, const Vec2 &b, const Vec2 &c) {
    const double area = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    if (std::abs(area) < 1e-14)
        return std::nullopt;
    const double inv = 1.0 / area;
    double w0 = ((b.x - p.x) * (c.y - p.y) - (c.x - p.x) * (b.y - p.y)) * inv;
    double w1 = ((c.x - p.x) * (a.y - p.y) - (a.x - p.x) * (c.y - p.y)) * inv;
    double w2 = 1.0 - w0 - w1;
    constexpr double kTol = 1e-12;
    if (w0 < -kTol || w1 < -kTol || w2 < -kTol)
        return std::nullopt;
    w0 = std::max(w0, 0.0);
    w1 = std::max(w1, 0.0);
    w2 = std::max(w2, 0.0);
    const double sum = w0 + w1 + w2;
    return std::array<double, 3>{w0 / sum, w1 / sum, w2 / sum};
}

UvChartIndex::UvChartIndex(std::shared_ptr<const TemplateMesh> mesh, int gridCells)
    : mMesh(std::move(mesh)) {
    mMesh->validate();
    const size_t faceCount = mMesh->faceCount();
    mCells = gridCells > 0 ? gridCells
                           : std::max(1, int(std::ceil(std::sqrt(2.0 * double(faceCount)))));
    mCellFaces.assign(size_t(mCells) * mCells, {});
    mFaceDegenerate.assign(faceCount, 0);

    auto cellOf = [&](double t) { return std::clamp(int(std::floor(t * mCells)), 0, mCells - 1); };
    constexpr double kPad = 1e-9;
    for (size_t f = 0; f < faceCount; ++f) {
        const auto &uv = mMesh->faceUvs[f];
        const double area =
            (uv[1].x - uv[0].x) * (uv[2].y - uv[0].y) - (uv[2].x - uv[0].x) * (uv[1].y - uv[0].y);
        if (std::abs(area) < 1e-14) {
            mFaceDegenerate[f] = 1;
            ++mDegenerate;
            continue;
        }
        const double minU = std::min({uv[0].x, uv[1].x, uv[2].x}) - kPad;
        const double maxU = std::max({uv[0].x, uv[1].x, uv[2].x}) + kPad;
        const double minV = std::min({uv[0].y, uv[1].y, uv[2].y}) - kPad;
        const double maxV = std::max({uv[0].y, uv[1].y, uv[2].y}) + kPad;
        for (int cy = cellOf(minV); cy <= cellOf(maxV); ++cy)
            for (int cx = cellOf(minU); cx <= cellOf(maxU); ++cx)
                mCellFaces[size_t(cy) * mCells + cx].push_back(uint32_t(f));
    }
}

SurfacePoint
UvChartIndex::makePoint(uint32_t face, const std::array<double, 3> &w) const {
    const auto &tri = mMesh->faces[face];
    const Vec3 &a = mMesh->vertices[tri[0]];
    const Vec3 &b = mMesh->vertices[tri[1]];
    const Vec3 &c = mMesh->vertices[tri[2]];
    SurfacePoint out;
    out.face = face;
    out.barycentric = w;
    out.position = {w[0] * a.x + w[1] * b.x + w[2] * c.x,
                    w[0] * a.y + w[1] * b.y + w[2] * c.y,
                    w[0] * a.z + w[1] * b.z + w[2] * c.z};
    return out;
}

std::optional<SurfacePoint>
UvChartIndex::locate(const Vec2 &uv) const {
    const int cx = std::clamp(int(std::floor(uv.x * mCells)), 0, mCells - 1);
    const int cy = std::clamp(int(std::floor(uv.y * mCells)), 0, mCells - 1);
    // Cell lists are in ascending face order, so the first hit is the lowest id.
    for (uint32_t f : mCellFaces[size_t(cy) * mCells + cx]) {
        const auto &t = mMesh->faceUvs[f];
        if (auto w = locateInUvTriangle(uv, t[0], t[1], t[2]))
            return makePoint(f, *w);
    }
    return std::nullopt;
}

std::optional<SurfacePoint>
UvChartIndex::locateBruteForce(const Vec2 &uv) const {
    for (size_t f = 0; f < mMesh->faceCount(); ++f) {
        const auto &t = mMesh->faceUvs[f];
        if (auto w = locateInUvTriangle(uv, t[0], t[1], t[2]))
            return makePoint(uint32_t(f), *w);
    }
    return std::nullopt;
}

UvGrid
sampleUvGrid(const UvChartIndex &index, int resolution) {
    if (resolution < 1)
        throw Error(ErrorKind::InvalidConfig, "UV grid resolution must be >= 1");
    UvGrid grid;
    grid.resolution = resolution;
    const size_t count = size_t(resolution) * resolution;
    grid.coords.resize(count);
    grid.valid.assign(count, 0);
    for (int j = 0; j < resolution; ++j) {
        for (int i = 0; i < resolution; ++i) {
            const size_t k = size_t(j) * resolution + i;
            grid.coords[k] = {(i + 0.5) / resolution, (j + 0.5) / resolution};
            if (auto hit = index.locate(grid.coords[k])) {
                grid.valid[k] = 1;
                grid.validIds.push_back(uint32_t(k));
                grid.anchors.push_back(*hit);
            }
        }
    }
    return grid;
}

} // namespace uvsplat
