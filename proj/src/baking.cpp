#include "sdstex/baking.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace sdstex {

std::size_t UvRaster::covered_count() const {
  return static_cast<std::size_t>(
      std::count_if(triangle.begin(), triangle.end(), [](std::int32_t t) { return t >= 0; }));
}

UvRaster rasterize_uv(const TriangleMesh& mesh, int resolution) {
  if (!mesh.has_uvs()) throw Error("baking requires a mesh with uv coordinates");
  if (resolution < 1) throw Error("atlas resolution must be >= 1");
  const auto texels = static_cast<std::size_t>(resolution) * resolution;
  UvRaster r;
  r.resolution = resolution;
  r.triangle.assign(texels, -1);
  r.barycentric.assign(texels, Vec3::Zero());
  r.surface_point.assign(texels, Vec3::Zero());

  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& ti = mesh.uv_triangles[t];
    // Texel space: x = u * R, y = (1 - v) * R.
    std::array<Vec2, 3> s;
    for (int k = 0; k < 3; ++k)
      s[k] = Vec2(mesh.uvs[ti[k]].x() * resolution, (1.0 - mesh.uvs[ti[k]].y()) * resolution);
    const auto edge = [](const Vec2& a, const Vec2& b, const Vec2& p) {
      return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
    };
    const double area = edge(s[0], s[1], s[2]);
    if (area == 0.0) continue;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({s[0].x(), s[1].x(), s[2].x()}) - 0.5)));
    const int x1 = std::min(resolution - 1, static_cast<int>(std::ceil(std::max({s[0].x(), s[1].x(), s[2].x()}) - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({s[0].y(), s[1].y(), s[2].y()}) - 0.5)));
    const int y1 = std::min(resolution - 1, static_cast<int>(std::ceil(std::max({s[0].y(), s[1].y(), s[2].y()}) - 0.5)));
    const auto& pi = mesh.triangles[t];
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const std::size_t texel = static_cast<std::size_t>(y) * resolution + x;
        if (r.triangle[texel] >= 0) continue;
        const Vec2 p(x + 0.5, y + 0.5);
        const Vec3 b(edge(s[1], s[2], p) / area, edge(s[2], s[0], p) / area,
                     edge(s[0], s[1], p) / area);
        if (b.minCoeff() < 0.0) continue;
        r.triangle[texel] = static_cast<std::int32_t>(t);
        r.barycentric[texel] = b;
        r.surface_point[texel] = b[0] * mesh.positions[pi[0]] + b[1] * mesh.positions[pi[1]] +
                                 b[2] * mesh.positions[pi[2]];
      }
    }
  }
  return r;
}

BakedTexture bake_texture(const TextureField& field, const TriangleMesh& mesh, int resolution) {
  BakedTexture out;
  out.raster = rasterize_uv(mesh, resolution);
  const UvRaster& r = out.raster;
  out.image = Image(resolution, resolution, 3, 0.0);
  const std::size_t texels = r.triangle.size();

  std::vector<std::int64_t> source(texels, -1);
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < texels; ++i) {
    if (!r.covered(i)) continue;
    const Vec3 c = eval_color(field, r.surface_point[i]);
    for (int k = 0; k < 3; ++k) out.image.data[i * 3 + k] = c[k];
    source[i] = static_cast<std::int64_t>(i);
    queue.push_back(i);
  }
  // Multi-source BFS: uncovered texels copy their nearest covered texel.
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    const int x = static_cast<int>(i % resolution);
    const int y = static_cast<int>(i / resolution);
    const int nx[4] = {x - 1, x + 1, x, x};
    const int ny[4] = {y, y, y - 1, y + 1};
    for (int k = 0; k < 4; ++k) {
      if (nx[k] < 0 || ny[k] < 0 || nx[k] >= resolution || ny[k] >= resolution) continue;
      const std::size_t j = static_cast<std::size_t>(ny[k]) * resolution + nx[k];
      if (source[j] >= 0) continue;
      source[j] = source[i];
      for (int c = 0; c < 3; ++c)
        out.image.data[j * 3 + c] = out.image.data[static_cast<std::size_t>(source[i]) * 3 + c];
      queue.push_back(j);
    }
  }
  return out;
}

double ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                    const Vec3& c) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < 1e-14) return -1.0;
  const double inv = 1.0 / det;
  const Vec3 tvec = origin - a;
  const double u = tvec.dot(pvec) * inv;
  if (u < 0.0 || u > 1.0) return -1.0;
  const Vec3 qvec = tvec.cross(e1);
  const double v = dir.dot(qvec) * inv;
  if (v < 0.0 || u + v > 1.0) return -1.0;
  return e2.dot(qvec) * inv;
}

bool point_visible(const TriangleMesh& mesh, const Camera& camera, const Vec3& point,
                   std::int32_t tri) {
  const Vec3 cam = camera.to_camera_space(point);
  if (cam.z() < kNearPlane) return false;
  const Vec2 px = camera.project_camera_space(cam);
  if (px.x() < 0.0 || px.y() < 0.0 || px.x() >= camera.resolution || px.y() >= camera.resolution)
    return false;

  const Vec3 to_eye = camera.eye - point;
  const double dist = to_eye.norm();
  {
    const auto& t = mesh.triangles[static_cast<std::size_t>(tri)];
    const Vec3 n = (mesh.positions[t[1]] - mesh.positions[t[0]])
                       .cross(mesh.positions[t[2]] - mesh.positions[t[0]])
                       .normalized();
    if (std::abs(n.dot(to_eye)) <= 1e-9 * dist) return false;
  }
  const Vec3 dir = point - camera.eye;
  for (std::size_t k = 0; k < mesh.triangles.size(); ++k) {
    if (static_cast<std::int32_t>(k) == tri) continue;
    const auto& t = mesh.triangles[k];
    const double s = ray_triangle(camera.eye, dir, mesh.positions[t[0]], mesh.positions[t[1]],
                                  mesh.positions[t[2]]);
    if (s > 0.0 && s < 1.0 - 1e-7) return false;
  }
  return true;
}

std::size_t CoverageMap::zero_view_texels() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < counts.size(); ++i)
    if (raster.covered(i) && counts[i] == 0) ++n;
  return n;
}

double CoverageMap::covered_fraction() const {
  const std::size_t covered = raster.covered_count();
  return covered ? 1.0 - static_cast<double>(zero_view_texels()) / covered : 0.0;
}

CoverageMap coverage_map(const TriangleMesh& mesh, std::span<const Camera> cameras,
                         int resolution) {
  CoverageMap m;
  m.raster = rasterize_uv(mesh, resolution);
  m.counts.assign(m.raster.triangle.size(), 0);
  for (const Camera& cam : cameras)
    for (std::size_t i = 0; i < m.counts.size(); ++i)
      if (m.raster.covered(i) && point_visible(mesh, cam, m.raster.surface_point[i], m.raster.triangle[i]))
        ++m.counts[i];
  return m;
}

}  // namespace sdstex
