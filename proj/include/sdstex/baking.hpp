#pragma once

#include "sdstex/image.hpp"
#include "sdstex/mesh.hpp"
#include "sdstex/renderer.hpp"
#include "sdstex/texture_field.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace sdstex {

// Texel -> surface mapping of a UV atlas. Texel (x, y) has its centre at
// u = (x + 0.5) / R, v = 1 - (y + 0.5) / R.
struct UvRaster {
  int resolution = 0;
  std::vector<std::int32_t> triangle;  // -1 where no uv triangle covers the texel
  std::vector<Vec3> barycentric;
  std::vector<Vec3> surface_point;

  bool covered(std::size_t texel) const { return triangle[texel] >= 0; }
  std::size_t covered_count() const;
};

UvRaster rasterize_uv(const TriangleMesh& mesh, int resolution);

struct BakedTexture {
  Image image;
  UvRaster raster;
};

// Evaluates the field at every covered texel; uncovered texels take the
// colour of the nearest covered texel (breadth-first flood fill).
BakedTexture bake_texture(const TextureField& field, const TriangleMesh& mesh, int resolution);

// True when `point` (lying on triangle `tri`) is seen by the camera: inside
// the frame, in front of the near plane, not edge-on, and no triangle lies
// strictly nearer along the eye ray.
bool point_visible(const TriangleMesh& mesh, const Camera& camera, const Vec3& point,
                   std::int32_t tri);

struct CoverageMap {
  UvRaster raster;
  std::vector<int> counts;

  std::size_t zero_view_texels() const;
  double covered_fraction() const;  // covered texels seen by >= 1 view
};

CoverageMap coverage_map(const TriangleMesh& mesh, std::span<const Camera> cameras,
                         int resolution);

// Moller-Trumbore; returns the ray parameter or a negative value on a miss.
double ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                    const Vec3& c);

}  // namespace sdstex
