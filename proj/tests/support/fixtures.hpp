#pragma once

#include "sdstex/image.hpp"
#include "sdstex/mesh.hpp"
#include "sdstex/random.hpp"

#include <cmath>

namespace fixture {

using sdstex::Vec3;

// Up to `max_triangles` random triangles inside the unit ball; some are
// large and overlapping, some thin.
inline sdstex::TriangleMesh random_mesh(sdstex::Rng& rng, int max_triangles = 100) {
  sdstex::TriangleMesh m;
  const int n = static_cast<int>(rng.uniform_int(1, max_triangles));
  for (int i = 0; i < n; ++i) {
    const Vec3 c(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    const double r = rng.uniform(0.05, 0.5);
    for (int k = 0; k < 3; ++k)
      m.positions.push_back(c + r * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)));
    m.triangles.push_back({3 * i, 3 * i + 1, 3 * i + 2});
  }
  return m;
}

// Axis-aligned square in the plane y = height, facing +y, with UVs
// spanning the full atlas.
inline sdstex::TriangleMesh horizontal_quad(double half, double height) {
  sdstex::TriangleMesh m;
  m.positions = {{-half, height, -half}, {half, height, -half}, {half, height, half}, {-half, height, half}};
  m.uvs = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  m.triangles = {{0, 2, 1}, {0, 3, 2}};
  m.uv_triangles = m.triangles;
  return m;
}

inline sdstex::Image random_image(sdstex::Rng& rng, int w, int h, int c, double lo = -1,
                                  double hi = 1) {
  sdstex::Image img(w, h, c);
  for (double& v : img.data) v = rng.uniform(lo, hi);
  return img;
}

inline sdstex::Image normal_image(sdstex::Rng& rng, int w, int h, int c) {
  sdstex::Image img(w, h, c);
  for (double& v : img.data) v = rng.normal();
  return img;
}

}  // namespace fixture
