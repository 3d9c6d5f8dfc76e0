#include "sdstex/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace sdstex {

namespace {

constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

struct ClipVertex {
  Vec3 cam;   // camera-space position (x right, y up, z forward)
  Vec3 bary;  // barycentric coordinates w.r.t. the original triangle
};

// Sutherland-Hodgman against z >= near.
std::vector<ClipVertex> clip_near(const std::array<ClipVertex, 3>& tri, double near) {
  std::vector<ClipVertex> out;
  out.reserve(4);
  for (int i = 0; i < 3; ++i) {
    const ClipVertex& a = tri[i];
    const ClipVertex& b = tri[(i + 1) % 3];
    const bool a_in = a.cam.z() >= near;
    const bool b_in = b.cam.z() >= near;
    if (a_in) out.push_back(a);
    if (a_in != b_in) {
      const double s = (near - a.cam.z()) / (b.cam.z() - a.cam.z());
      ClipVertex v{a.cam + s * (b.cam - a.cam), a.bary + s * (b.bary - a.bary)};
      v.cam.z() = near;
      out.push_back(v);
    }
  }
  return out;
}

double edge(const Vec2& a, const Vec2& b, const Vec2& p) {
  return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

void raster_subtriangle(const Camera& cam, const std::array<ClipVertex, 3>& v, std::int32_t tri_id,
                        const std::array<Vec3, 3>& world, GBuffer& gb) {
  const int res = cam.resolution;
  std::array<Vec2, 3> s;
  std::array<double, 3> inv_z;
  for (int i = 0; i < 3; ++i) {
    s[i] = cam.project_camera_space(v[i].cam);
    inv_z[i] = 1.0 / v[i].cam.z();
  }
  const double area = edge(s[0], s[1], s[2]);
  if (area == 0.0 || !std::isfinite(area)) return;

  const double min_x = std::min({s[0].x(), s[1].x(), s[2].x()});
  const double max_x = std::max({s[0].x(), s[1].x(), s[2].x()});
  const double min_y = std::min({s[0].y(), s[1].y(), s[2].y()});
  const double max_y = std::max({s[0].y(), s[1].y(), s[2].y()});
  const int x0 = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
  const int x1 = std::min(res - 1, static_cast<int>(std::ceil(max_x - 0.5)));
  const int y0 = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
  const int y1 = std::min(res - 1, static_cast<int>(std::ceil(max_y - 0.5)));

  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Vec2 p(x + 0.5, y + 0.5);
      const double b0 = edge(s[1], s[2], p) / area;
      const double b1 = edge(s[2], s[0], p) / area;
      const double b2 = edge(s[0], s[1], p) / area;
      if (b0 < 0.0 || b1 < 0.0 || b2 < 0.0) continue;
      const double iz = b0 * inv_z[0] + b1 * inv_z[1] + b2 * inv_z[2];
      const double depth = 1.0 / iz;
      const std::size_t pix = static_cast<std::size_t>(y) * res + x;
      if (!(depth < gb.depth[pix])) continue;
      Vec3 lambda =
          (b0 * inv_z[0] * v[0].bary + b1 * inv_z[1] * v[1].bary + b2 * inv_z[2] * v[2].bary) *
          depth;
      gb.mask[pix] = 1;
      gb.depth[pix] = depth;
      gb.triangle[pix] = tri_id;
      gb.barycentric[pix] = lambda;
      gb.surface_point[pix] = lambda[0] * world[0] + lambda[1] * world[1] + lambda[2] * world[2];
    }
  }
}

}  // namespace

double Camera::tan_half_fov() const { return std::tan(deg2rad(vertical_fov) * 0.5); }

Vec3 Camera::pixel_direction(int x, int y) const {
  const double t = tan_half_fov();
  const double sx = ((x + 0.5) / resolution * 2.0 - 1.0) * t;
  const double sy = (1.0 - (y + 0.5) / resolution * 2.0) * t;
  return forward + sx * right + sy * up;
}

Vec3 Camera::to_camera_space(const Vec3& world) const {
  const Vec3 d = world - eye;
  return {d.dot(right), d.dot(up), d.dot(forward)};
}

Vec2 Camera::project_camera_space(const Vec3& c) const {
  const double t = tan_half_fov();
  return {(c.x() / (c.z() * t) + 1.0) * 0.5 * resolution,
          (1.0 - c.y() / (c.z() * t)) * 0.5 * resolution};
}

Camera look_at(const Vec3& eye, const Vec3& target, double fov_deg, int resolution) {
  Camera cam;
  cam.eye = eye;
  cam.vertical_fov = fov_deg;
  cam.resolution = resolution;
  cam.forward = (target - eye).normalized();
  Vec3 world_up(0, 1, 0);
  if (std::abs(cam.forward.dot(world_up)) > 1.0 - 1e-12) world_up = Vec3(1, 0, 0);
  cam.right = cam.forward.cross(world_up).normalized();
  cam.up = cam.right.cross(cam.forward).normalized();
  return cam;
}

Camera camera_from_spherical(double elevation_deg, double azimuth_deg, double distance,
                             double fov_deg, int resolution) {
  const double e = deg2rad(elevation_deg);
  const double a = deg2rad(azimuth_deg);
  const double ce = std::abs(elevation_deg) == 90.0 ? 0.0 : std::cos(e);
  const double se = std::abs(elevation_deg) == 90.0 ? std::copysign(1.0, elevation_deg) : std::sin(e);
  const Vec3 eye = distance * Vec3(ce * std::cos(a), se, ce * std::sin(a));
  return look_at(eye, Vec3::Zero(), fov_deg, resolution);
}

GBuffer::GBuffer(int res)
    : resolution(res),
      mask(static_cast<std::size_t>(res) * res, 0),
      depth(static_cast<std::size_t>(res) * res, std::numeric_limits<double>::infinity()),
      surface_point(static_cast<std::size_t>(res) * res, Vec3::Zero()),
      triangle(static_cast<std::size_t>(res) * res, -1),
      barycentric(static_cast<std::size_t>(res) * res, Vec3::Zero()) {}

std::size_t GBuffer::hit_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

GBuffer rasterize(const TriangleMesh& mesh, const Camera& camera) {
  GBuffer gb(camera.resolution);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& idx = mesh.triangles[t];
    const std::array<Vec3, 3> world = {mesh.positions[idx[0]], mesh.positions[idx[1]],
                                       mesh.positions[idx[2]]};
    std::array<ClipVertex, 3> tri;
    bool all_front = true;
    bool all_behind = true;
    for (int i = 0; i < 3; ++i) {
      tri[i].cam = camera.to_camera_space(world[i]);
      tri[i].bary = Vec3::Unit(i);
      all_front = all_front && tri[i].cam.z() >= kNearPlane;
      all_behind = all_behind && tri[i].cam.z() < kNearPlane;
    }
    if (all_behind) continue;
    const auto id = static_cast<std::int32_t>(t);
    if (all_front) {
      raster_subtriangle(camera, tri, id, world, gb);
      continue;
    }
    const auto poly = clip_near(tri, kNearPlane);
    for (std::size_t k = 1; k + 1 < poly.size(); ++k)
      raster_subtriangle(camera, {poly[0], poly[k], poly[k + 1]}, id, world, gb);
  }
  return gb;
}

Image shade(const GBuffer& gbuffer, const TextureField& field, double background) {
  const int res = gbuffer.resolution;
  Image img(res, res, 3, background);
  for (std::size_t p = 0; p < gbuffer.pixel_count(); ++p) {
    if (!gbuffer.hit(p)) continue;
    const Vec3 rgb = eval_color(field, gbuffer.surface_point[p]);
    for (int c = 0; c < 3; ++c) img.data[p * 3 + c] = rgb[c];
  }
  return img;
}

void shade_backward(const GBuffer& gbuffer, const TextureField& field, const Image& upstream,
                    std::span<double> gradient) {
  if (upstream.width != gbuffer.resolution || upstream.height != gbuffer.resolution ||
      upstream.channels != 3)
    throw Error("shade_backward: upstream image shape mismatch");
  if (gradient.size() != field.parameter_count())
    throw Error("shade_backward: gradient buffer size mismatch");
  for (std::size_t p = 0; p < gbuffer.pixel_count(); ++p) {
    if (!gbuffer.hit(p)) continue;
    const Vec3 up(upstream.data[p * 3], upstream.data[p * 3 + 1], upstream.data[p * 3 + 2]);
    if (up.isZero(0.0)) continue;
    accumulate_color_gradient(field, gbuffer.surface_point[p], up, gradient);
  }
}

std::vector<double> shade_backward(const GBuffer& gbuffer, const TextureField& field,
                                   const Image& upstream) {
  std::vector<double> grad(field.parameter_count(), 0.0);
  shade_backward(gbuffer, field, upstream, grad);
  return grad;
}

Image normalize_depth(const GBuffer& gbuffer) {
  const int res = gbuffer.resolution;
  Image out(res, res, 1, -1.0);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < gbuffer.pixel_count(); ++p) {
    if (!gbuffer.hit(p)) continue;
    lo = std::min(lo, gbuffer.depth[p]);
    hi = std::max(hi, gbuffer.depth[p]);
  }
  for (std::size_t p = 0; p < gbuffer.pixel_count(); ++p) {
    if (!gbuffer.hit(p)) continue;
    out.data[p] = hi > lo ? 1.0 - 2.0 * (gbuffer.depth[p] - lo) / (hi - lo) : 1.0;
  }
  return out;
}

Vec2 pixel_uv(const TriangleMesh& mesh, const GBuffer& gbuffer, std::size_t pixel) {
  const auto& t = mesh.uv_triangles[static_cast<std::size_t>(gbuffer.triangle[pixel])];
  const Vec3& b = gbuffer.barycentric[pixel];
  return b[0] * mesh.uvs[t[0]] + b[1] * mesh.uvs[t[1]] + b[2] * mesh.uvs[t[2]];
}

Vec3 sample_atlas_nearest(const Image& atlas, const Vec2& uv) {
  const int x = std::clamp(static_cast<int>(std::floor(uv.x() * atlas.width)), 0, atlas.width - 1);
  const int y =
      std::clamp(static_cast<int>(std::floor((1.0 - uv.y()) * atlas.height)), 0, atlas.height - 1);
  return {atlas.at(x, y, 0), atlas.at(x, y, 1), atlas.at(x, y, 2)};
}

Image shade_with_atlas(const TriangleMesh& mesh, const GBuffer& gbuffer, const Image& atlas,
                       double background) {
  if (!mesh.has_uvs()) throw Error("mesh has no uv atlas");
  const int res = gbuffer.resolution;
  Image img(res, res, 3, background);
  for (std::size_t p = 0; p < gbuffer.pixel_count(); ++p) {
    if (!gbuffer.hit(p)) continue;
    const Vec3 rgb = sample_atlas_nearest(atlas, pixel_uv(mesh, gbuffer, p));
    for (int c = 0; c < 3; ++c) img.data[p * 3 + c] = rgb[c];
  }
  return img;
}

}  // namespace sdstex
