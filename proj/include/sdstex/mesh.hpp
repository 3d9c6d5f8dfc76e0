#pragma once

#include "sdstex/common.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace sdstex {

using TriangleIndices = std::array<int, 3>;

// Fixed geometry being textured. uvs/uv_triangles are either both empty or
// uv_triangles has one entry per triangle.
struct TriangleMesh {
  std::vector<Vec3> positions;
  std::vector<TriangleIndices> triangles;
  std::vector<Vec2> uvs;
  std::vector<TriangleIndices> uv_triangles;

  bool has_uvs() const { return !uv_triangles.empty(); }
  std::size_t triangle_count() const { return triangles.size(); }

  // Throws IndexError/Error when an invariant is broken.
  void validate() const;
};

TriangleMesh parse_obj(std::istream& in);
TriangleMesh load_obj(const std::filesystem::path& path);

// Minimal writer (v, vt, f). Coordinates are written in shortest
// round-trip form so parse_obj(write_obj(m)) reproduces m exactly.
void write_obj(const TriangleMesh& mesh, std::ostream& out);
void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path);

struct NormalizedMesh {
  TriangleMesh mesh;
  // Applied transform: p' = (p + translation) * scale.
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;
  std::size_t dropped_degenerate = 0;
};

inline constexpr double kDegenerateArea = 1e-12;

// Centers the vertex centroid at the origin and scales the farthest vertex
// to distance 1. Triangles with area below kDegenerateArea afterwards are
// dropped and counted.
NormalizedMesh normalize_mesh(const TriangleMesh& mesh);

double triangle_area(const TriangleMesh& mesh, std::size_t tri);

}  // namespace sdstex
