// Copyright Contributors to the uvsplat Project
// SPDX-License-Identifier: Apache-2.0
//
// Template mesh with a UV layout, and the UV -> surface lookup that anchors
// one Gaussian per valid UV texel.
#pragma once

#include "uvsplat/math.hpp"

#include <array>
#include <cstdint>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace uvsplat {

struct TemplateMesh {
    std::vector<Vec3> vertices;                  // meters
    std::vector<std::array<uint32_t, 3>> faces;  // vertex indices
    std::vector<std::array<Vec2, 3>> faceUvs;    // per face corner, in [0,1]^2

    size_t faceCount() const { return faces.size(); }

    /// Throws Error(InvalidMesh / IndexOutOfRange) if an invariant is broken.
    void validate() const;
};

/// Parses Wavefront OBJ text. Only `v`, `vt` and `f` records are consumed;
/// polygons are fan-triangulated. Negative (relative) indices are accepted.
TemplateMesh parseObj(std::istream &in);
TemplateMesh loadObj(const std::string &path);
void writeObj(std::ostream &out, const TemplateMesh &mesh);

/// Latitude/longitude sphere whose UV layout covers the whole unit square.
/// The pole axis is +y.
TemplateMesh makeUvSphere(double radius, int segments, int rings, const Vec3 &center = {});

/// Two triangles spanning [0,size]^2 in the z = 0 plane with UV = position / size.
TemplateMesh makeUnitSquare(double size = 1.0);

struct SurfacePoint {
    Vec3 position;
    uint32_t face = 0;
    std::array<double, 3> barycentric{};
};

/// Barycentric location of `p` in the UV triangle (a, b, c). Returns nothing
/// when the point lies outside or the triangle is degenerate. Weights are
/// clamped to be non-negative and renormalized.
std::optional<std::array<double, 3>>
locateInUvTriangle(const Vec2 &p, const Vec2 &a, const Vec2 &b, const Vec2 &c);

/// Uniform-grid acceleration over the UV-space triangles of a mesh.
class UvChartIndex {
  public:
    /// `gridCells` <= 0 selects ceil(sqrt(2 * faceCount)) cells per axis.
    explicit UvChartIndex(std::shared_ptr<const TemplateMesh> mesh, int gridCells = 0);

    /// Lowest-id face containing `uv`, or empty for gutter points.
    std::optional<SurfacePoint> locate(const Vec2 &uv) const;

    /// Same contract as locate(), scanning every face.
    std::optional<SurfacePoint> locateBruteForce(const Vec2 &uv) const;

    const TemplateMesh &mesh() const { return *mMesh; }
    int gridCells() const { return mCells; }
    size_t degenerateFaceCount() const { return mDegenerate; }
    const std::vector<uint32_t> &cellFaces(int cx, int cy) const {
        return mCellFaces[size_t(cy) * mCells + cx];
    }

  private:
    SurfacePoint makePoint(uint32_t face, const std::array<double, 3> &w) const;

    std::shared_ptr<const TemplateMesh> mMesh;
    int mCells = 1;
    size_t mDegenerate = 0;
    std::vector<uint8_t> mFaceDegenerate;
    std::vector<std::vector<uint32_t>> mCellFaces;
};

inline std::optional<SurfacePoint> uvToSurface(const UvChartIndex &index, const Vec2 &uv) {
    return index.locate(uv);
}

/// Texel-centre samples of UV space at resolution R. Row-major with v as the
/// row: point k = j * R + i sits at ((i + 0.5) / R, (j + 0.5) / R).
struct UvGrid {
    int resolution = 0;
    std::vector<Vec2> coords;
    std::vector<uint8_t> valid;

    // Compacted data for the valid points, in grid order.
    std::vector<uint32_t> validIds;
    std::vector<SurfacePoint> anchors;

    size_t validCount() const { return validIds.size(); }
};

UvGrid sampleUvGrid(const UvChartIndex &index, int resolution);

} // namespace uvsplat
