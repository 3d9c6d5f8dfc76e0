#pragma once

#include "sdstex/common.hpp"
#include "sdstex/image.hpp"
#include "sdstex/mesh.hpp"
#include "sdstex/texture_field.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace sdstex {

inline constexpr double kBackground = 0.5;
inline constexpr double kNearPlane = 1e-4;

// Pinhole camera with a square frame. forward/right/up form a right-handed
// orthonormal frame (right = forward x up).
struct Camera {
  Vec3 eye = Vec3::Zero();
  Vec3 forward = Vec3(0, 0, -1);
  Vec3 right = Vec3(1, 0, 0);
  Vec3 up = Vec3(0, 1, 0);
  double vertical_fov = 45.0;
  int resolution = 64;

  double tan_half_fov() const;
  // Unnormalised direction through the centre of pixel (x, y); its
  // component along `forward` is exactly 1, so ray parameter == depth.
  Vec3 pixel_direction(int x, int y) const;
  // Continuous pixel coordinates of a camera-space point (z > 0).
  Vec2 project_camera_space(const Vec3& cam) const;
  Vec3 to_camera_space(const Vec3& world) const;
};

Camera look_at(const Vec3& eye, const Vec3& target, double fov_deg, int resolution);

// eye = distance * (cos e cos a, sin e, cos e sin a), looking at the origin.
Camera camera_from_spherical(double elevation_deg, double azimuth_deg, double distance,
                             double fov_deg = 45.0, int resolution = 64);

// Per-pixel rasterization record, row-major with row 0 at the top.
struct GBuffer {
  int resolution = 0;
  std::vector<std::uint8_t> mask;
  std::vector<double> depth;  // distance along camera forward, +inf on misses
  std::vector<Vec3> surface_point;
  std::vector<std::int32_t> triangle;  // -1 on misses
  std::vector<Vec3> barycentric;

  explicit GBuffer(int res = 0);
  std::size_t pixel_count() const { return mask.size(); }
  std::size_t hit_count() const;
  bool hit(std::size_t pixel) const { return mask[pixel] != 0; }
};

// Z-buffered rasterization with perspective-correct barycentrics. No
// back-face culling; triangles are clipped against the near plane.
GBuffer rasterize(const TriangleMesh& mesh, const Camera& camera);

// RGB image: eval_color on hit pixels, `background` elsewhere.
Image shade(const GBuffer& gbuffer, const TextureField& field, double background = kBackground);

// Adds sum over hit pixels of d(upstream . colour)/d(params) into
// `gradient`. Visibility and surface points are held fixed.
void shade_backward(const GBuffer& gbuffer, const TextureField& field, const Image& upstream,
                    std::span<double> gradient);
std::vector<double> shade_backward(const GBuffer& gbuffer, const TextureField& field,
                                   const Image& upstream);

// Min-max normalised depth over hits: nearest +1, farthest -1, misses -1.
// If all hits share one depth they map to +1.
Image normalize_depth(const GBuffer& gbuffer);

// Interpolated UV of a hit pixel (mesh must carry uvs).
Vec2 pixel_uv(const TriangleMesh& mesh, const GBuffer& gbuffer, std::size_t pixel);

// Renders with a UV atlas using nearest-texel lookup.
Image shade_with_atlas(const TriangleMesh& mesh, const GBuffer& gbuffer, const Image& atlas,
                       double background = kBackground);

// Nearest-texel lookup; v = 1 is the top row of the atlas.
Vec3 sample_atlas_nearest(const Image& atlas, const Vec2& uv);

}  // namespace sdstex
