#include "sdstex/renderer.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace sdstex;

namespace {

void expect_orthonormal(const Camera& c) {
  EXPECT_NEAR(c.forward.norm(), 1.0, 1e-12);
  EXPECT_NEAR(c.right.norm(), 1.0, 1e-12);
  EXPECT_NEAR(c.up.norm(), 1.0, 1e-12);
  EXPECT_NEAR(c.forward.dot(c.right), 0.0, 1e-12);
  EXPECT_NEAR(c.forward.dot(c.up), 0.0, 1e-12);
  EXPECT_NEAR(c.right.dot(c.up), 0.0, 1e-12);
  EXPECT_NEAR((c.forward.cross(c.up) - c.right).norm(), 0.0, 1e-12);
}

TextureField small_field(std::uint64_t seed) {
  HashGridConfig cfg;
  cfg.levels = 3;
  cfg.table_size_log2 = 10;
  TextureField f = init_random(cfg, seed);
  auto p = f.parameters();
  for (std::size_t i = 0; i < f.weight_offset(0, 0); ++i) p[i] *= 50.0;
  for (int c = 0; c < 3; ++c) p[f.bias_offset(c)] = 0.1 * (c - 1);
  return f;
}

GBuffer cube_gbuffer(int res, double elev = 25, double azim = 40) {
  static const TriangleMesh mesh = normalize_mesh(load_obj(SDSTEX_ASSET_DIR "/cube.obj")).mesh;
  return rasterize(mesh, camera_from_spherical(elev, azim, 2.0, 45.0, res));
}

}  // namespace

TEST(Camera, OnAxis) {
  Camera c = camera_from_spherical(0, 0, 2);
  EXPECT_NEAR((c.eye - Vec3(2, 0, 0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((c.forward - Vec3(-1, 0, 0)).norm(), 0.0, 1e-15);
  expect_orthonormal(c);
}

TEST(Camera, PoleFallback) {
  for (double azim : {0.0, 77.0, 200.0}) {
    Camera c = camera_from_spherical(90, azim, 1.5);
    EXPECT_NEAR((c.eye - Vec3(0, 1.5, 0)).norm(), 0.0, 1e-12);
    expect_orthonormal(c);
    Camera d = camera_from_spherical(-90, azim, 1.5);
    expect_orthonormal(d);
  }
}

TEST(Camera, LooksAtOrigin) {
  Camera c = camera_from_spherical(10, 123, 1.0);
  EXPECT_NEAR(c.eye.norm(), 1.0, 1e-12);
  EXPECT_NEAR(c.forward.dot(-c.eye.normalized()), 1.0, 1e-12);
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    Camera r = camera_from_spherical(rng.uniform(-89, 89), rng.uniform(0, 360), rng.uniform(0.5, 3));
    expect_orthonormal(r);
    EXPECT_NEAR(r.forward.dot(-r.eye.normalized()), 1.0, 1e-12);
  }
}

TEST(Camera, ProjectionInvertsPixelDirection) {
  Camera c = camera_from_spherical(20, 50, 2.0, 45.0, 32);
  for (int y = 0; y < 32; y += 5)
    for (int x = 0; x < 32; x += 7) {
      const Vec3 world = c.eye + 1.7 * c.pixel_direction(x, y);
      const Vec2 px = c.project_camera_space(c.to_camera_space(world));
      EXPECT_NEAR(px.x(), x + 0.5, 1e-10);
      EXPECT_NEAR(px.y(), y + 0.5, 1e-10);
    }
}

TEST(Rasterize, FullFrustumConstantDepth) {
  const double d = 3.25;
  TriangleMesh m;
  m.positions = {{-100, -100, -d}, {100, -100, -d}, {0, 100, -d}};
  m.triangles = {{0, 1, 2}};
  Camera c = look_at(Vec3::Zero(), Vec3(0, 0, -1), 45.0, 16);
  GBuffer gb = rasterize(m, c);
  EXPECT_EQ(gb.hit_count(), gb.pixel_count());
  for (std::size_t p = 0; p < gb.pixel_count(); ++p) EXPECT_NEAR(gb.depth[p], d, 1e-9);
}

TEST(Rasterize, BehindCameraIsEmpty) {
  TriangleMesh m;
  m.positions = {{-1, -1, 2}, {1, -1, 2}, {0, 1, 2}};
  m.triangles = {{0, 1, 2}};
  GBuffer gb = rasterize(m, look_at(Vec3::Zero(), Vec3(0, 0, -1), 45.0, 16));
  EXPECT_EQ(gb.hit_count(), 0u);
  for (std::size_t p = 0; p < gb.pixel_count(); ++p) {
    EXPECT_EQ(gb.triangle[p], -1);
    EXPECT_TRUE(std::isinf(gb.depth[p]));
  }
}

TEST(Rasterize, NoBackFaceCulling) {
  TriangleMesh m;
  m.positions = {{-1, -1, -2}, {1, -1, -2}, {0, 1, -2}};
  m.triangles = {{0, 1, 2}};
  Camera c = look_at(Vec3::Zero(), Vec3(0, 0, -1), 45.0, 16);
  const auto front = rasterize(m, c).hit_count();
  m.triangles = {{0, 2, 1}};
  EXPECT_EQ(rasterize(m, c).hit_count(), front);
  EXPECT_GT(front, 0u);
}

TEST(Rasterize, TwoOverlappingTrianglesMatchRayCaster) {
  TriangleMesh m;
  m.positions = {{-0.8, -0.6, 0.2}, {0.7, -0.5, -0.3}, {0.0, 0.8, 0.1},
                 {-0.6, 0.5, -0.2}, {0.8, 0.6, 0.3}, {0.1, -0.9, -0.1}};
  m.triangles = {{0, 1, 2}, {3, 4, 5}};
  Camera c = camera_from_spherical(15, 80, 2.0, 45.0, 32);
  GBuffer gb = rasterize(m, c);
  auto hits = oracle::ray_cast(m, c, kNearPlane);
  for (std::size_t p = 0; p < hits.size(); ++p) EXPECT_EQ(gb.triangle[p], hits[p].triangle) << p;
}

TEST(Rasterize, RandomMeshesMatchRayCaster) {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const TriangleMesh m = fixture::random_mesh(rng);
    Camera c = camera_from_spherical(rng.uniform(-80, 80), rng.uniform(0, 360), rng.uniform(1.6, 2.5), 45.0, 32);
    GBuffer gb = rasterize(m, c);
    auto hits = oracle::ray_cast(m, c, kNearPlane);
    for (std::size_t p = 0; p < hits.size(); ++p) {
      const bool tie = hits[p].runner_up - hits[p].depth < 1e-12;
      if (!tie) ASSERT_EQ(gb.triangle[p], hits[p].triangle) << "trial " << trial << " pixel " << p;
      if (hits[p].triangle >= 0) {
        ASSERT_TRUE(gb.hit(p));
        ASSERT_NEAR(gb.depth[p], hits[p].depth, 1e-9 * hits[p].depth);
      }
    }
  }
}

TEST(Rasterize, BarycentricsReconstructSurfacePoint) {
  const TriangleMesh m = normalize_mesh(load_obj(SDSTEX_ASSET_DIR "/cube.obj")).mesh;
  Camera c = camera_from_spherical(30, 20, 2.0, 45.0, 32);
  GBuffer gb = rasterize(m, c);
  for (std::size_t p = 0; p < gb.pixel_count(); ++p) {
    if (!gb.hit(p)) continue;
    const auto& t = m.triangles[gb.triangle[p]];
    const Vec3& b = gb.barycentric[p];
    EXPECT_NEAR(b.sum(), 1.0, 1e-12);
    const Vec3 q = b[0] * m.positions[t[0]] + b[1] * m.positions[t[1]] + b[2] * m.positions[t[2]];
    EXPECT_LT((q - gb.surface_point[p]).norm(), 1e-12);
    EXPECT_NEAR(c.to_camera_space(q).z(), gb.depth[p], 1e-9);
  }
}

TEST(Shade, ConstantField) {
  HashGridConfig cfg;
  TextureField f(cfg);
  f.parameters()[f.bias_offset(0)] = 0.4;
  GBuffer gb = cube_gbuffer(32);
  Image img = shade(gb, f);
  const double expect = 1.0 / (1.0 + std::exp(-0.4));
  for (std::size_t p = 0; p < gb.pixel_count(); ++p) {
    EXPECT_DOUBLE_EQ(img.data[3 * p], gb.hit(p) ? expect : 0.5);
    EXPECT_DOUBLE_EQ(img.data[3 * p + 1], 0.5);
  }
}

TEST(Shade, EmptyGBufferIsBackground) {
  GBuffer gb(8);
  Image img = shade(gb, small_field(1));
  for (double v : img.data) EXPECT_EQ(v, 0.5);
}

TEST(Shade, PixelEqualsEvalColor) {
  TextureField f = small_field(2);
  GBuffer gb = cube_gbuffer(32);
  Image img = shade(gb, f);
  for (std::size_t p = 0; p < gb.pixel_count(); ++p) {
    if (!gb.hit(p)) continue;
    const Vec3 c = eval_color(f, gb.surface_point[p]);
    for (int k = 0; k < 3; ++k) EXPECT_EQ(img.data[3 * p + k], c[k]);
  }
}

TEST(ShadeBackward, MissOnlyUpstreamIsZero) {
  TextureField f = small_field(3);
  GBuffer gb = cube_gbuffer(32);
  Image up(32, 32, 3);
  for (std::size_t p = 0; p < gb.pixel_count(); ++p)
    if (!gb.hit(p))
      for (int k = 0; k < 3; ++k) up.data[3 * p + k] = 1.0;
  for (double g : shade_backward(gb, f, up)) ASSERT_EQ(g, 0.0);
}

TEST(ShadeBackward, SingleHitPixel) {
  TextureField f = small_field(4);
  GBuffer gb = cube_gbuffer(32);
  std::size_t pix = 0;
  while (!gb.hit(pix)) ++pix;
  Image up(32, 32, 3);
  const Vec3 u(0.3, -1.2, 0.7);
  for (int k = 0; k < 3; ++k) up.data[3 * pix + k] = u[k];
  const auto dense = shade_backward(gb, f, up);
  std::vector<double> expect(f.parameter_count(), 0.0);
  accumulate_color_gradient(f, gb.surface_point[pix], u, expect);
  EXPECT_EQ(dense, expect);
}

TEST(ShadeBackward, SixthOrderFiniteDifferences) {
  TextureField f = small_field(5);
  GBuffer gb = cube_gbuffer(24);
  Rng rng(5);
  Image up = fixture::normal_image(rng, 24, 24, 3);
  const auto g = shade_backward(gb, f, up);
  const Image base = shade(gb, f);
  std::vector<std::size_t> touched;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g[i] != 0.0) touched.push_back(i);
  ASSERT_GE(touched.size(), 20u);
  auto params = f.parameters();
  for (int n = 0; n < 20; ++n) {
    const std::size_t k = touched[rng.uniform_int(0, static_cast<std::int64_t>(touched.size()) - 1)];
    const double orig = params[k];
    auto loss = [&](double d) {
      params[k] = orig + d;
      Image img = shade(gb, f);
      params[k] = orig;
      double s = 0;
      for (std::size_t i = 0; i < img.data.size(); ++i) s += up.data[i] * (img.data[i] - base.data[i]);
      return s;
    };
    const double h = 0.03;
    const double fd = (loss(3 * h) - 9 * loss(2 * h) + 45 * loss(h) - 45 * loss(-h) + 9 * loss(-2 * h) -
                       loss(-3 * h)) /
                      (60 * h);
    EXPECT_LT(std::abs(fd - g[k]) / std::max(std::abs(fd), std::abs(g[k])), 1e-5) << k;
  }
}

// <U, J d> computed by forward-mode differentiation against <J^T U, d>.
TEST(ShadeBackward, AdjointConsistency) {
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    TextureField f = small_field(10 + trial);
    GBuffer gb = cube_gbuffer(24, rng.uniform(-60, 60), rng.uniform(0, 360));
    Image up = fixture::normal_image(rng, 24, 24, 3);
    TextureField delta(f.config());
    for (double& v : delta.parameters()) v = rng.normal();

    const auto jt_u = shade_backward(gb, f, up);
    long double rhs = 0;
    for (std::size_t i = 0; i < jt_u.size(); ++i) rhs += static_cast<long double>(jt_u[i]) * delta.parameters()[i];

    const int LF = f.config().feature_count();
    long double lhs = 0;
    for (std::size_t p = 0; p < gb.pixel_count(); ++p) {
      if (!gb.hit(p)) continue;
      const Vec3& x = gb.surface_point[p];
      const auto feats = f.features(x);
      const auto dfeats = delta.features(x);  // features are linear in the tables
      const Vec3 c = eval_color(f, x);
      for (int ch = 0; ch < 3; ++ch) {
        double dz = delta.parameters()[delta.bias_offset(ch)];
        for (int k = 0; k < LF; ++k)
          dz += delta.parameters()[delta.weight_offset(ch, k)] * feats[k] +
                f.parameters()[f.weight_offset(ch, k)] * dfeats[k];
        lhs += static_cast<long double>(up.data[3 * p + ch]) * c[ch] * (1 - c[ch]) * dz;
      }
    }
    EXPECT_LT(std::abs(static_cast<double>(lhs - rhs)) / std::abs(static_cast<double>(rhs)), 1e-10);
  }
}

TEST(NormalizeDepth, Endpoints) {
  GBuffer gb(2);
  gb.mask = {1, 1, 0, 1};
  gb.depth = {0.8, 1.2, std::numeric_limits<double>::infinity(), 1.0};
  Image d = normalize_depth(gb);
  EXPECT_EQ(d.data[0], 1.0);
  EXPECT_EQ(d.data[1], -1.0);
  EXPECT_EQ(d.data[2], -1.0);
  EXPECT_NEAR(d.data[3], 0.0, 1e-15);
}

TEST(NormalizeDepth, ConstantAndEmpty) {
  GBuffer gb(2);
  gb.mask = {1, 0, 1, 0};
  gb.depth = {2.0, std::numeric_limits<double>::infinity(), 2.0, std::numeric_limits<double>::infinity()};
  Image d = normalize_depth(gb);
  EXPECT_EQ(d.data, (std::vector<double>{1, -1, 1, -1}));
  for (double v : normalize_depth(GBuffer(4)).data) EXPECT_EQ(v, -1.0);
}

TEST(NormalizeDepth, RangeProperty) {
  GBuffer gb = cube_gbuffer(32);
  Image d = normalize_depth(gb);
  for (std::size_t p = 0; p < gb.pixel_count(); ++p) {
    EXPECT_GE(d.data[p], -1.0);
    EXPECT_LE(d.data[p], 1.0);
  }
}

TEST(Renderer, Deterministic) {
  TextureField f = small_field(7);
  GBuffer a = cube_gbuffer(32), b = cube_gbuffer(32);
  EXPECT_EQ(a.depth, b.depth);
  EXPECT_EQ(a.triangle, b.triangle);
  EXPECT_EQ(shade(a, f).data, shade(b, f).data);
  Rng rng(1);
  Image up = fixture::normal_image(rng, 32, 32, 3);
  EXPECT_EQ(shade_backward(a, f, up), shade_backward(b, f, up));
}

TEST(Atlas, NearestTexelLookup) {
  Image atlas(4, 4, 3);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) atlas.at(x, y, 0) = 10 * y + x;
  EXPECT_EQ(sample_atlas_nearest(atlas, Vec2(0.1, 0.95))[0], 0.0);  // top-left
  EXPECT_EQ(sample_atlas_nearest(atlas, Vec2(0.9, 0.05))[0], 33.0);
  EXPECT_EQ(sample_atlas_nearest(atlas, Vec2(1.0, 0.0))[0], 33.0);
}
