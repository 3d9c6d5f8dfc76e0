#include "sdstex/mesh.hpp"
#include "sdstex/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace sdstex;

namespace {

TriangleMesh parse(const std::string& text) {
  std::istringstream in(text);
  return parse_obj(in);
}

TriangleMesh cube(double h) {
  std::ostringstream s;
  s.precision(17);
  for (int i = 0; i < 8; ++i)
    s << "v " << (i & 1 ? h : -h) << ' ' << (i & 2 ? h : -h) << ' ' << (i & 4 ? h : -h) << '\n';
  s << "f 1 3 4 2\nf 5 6 8 7\nf 1 2 6 5\nf 3 7 8 4\nf 1 5 7 3\nf 2 4 8 6\n";
  return parse(s.str());
}

}  // namespace

TEST(Obj, MinimalTriangle) {
  auto m = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
  EXPECT_EQ(m.positions.size(), 3u);
  ASSERT_EQ(m.triangles.size(), 1u);
  EXPECT_EQ(m.triangles[0], (TriangleIndices{0, 1, 2}));
  EXPECT_FALSE(m.has_uvs());
}

TEST(Obj, QuadCubeFanTriangulates) {
  auto m = cube(1.0);
  EXPECT_EQ(m.positions.size(), 8u);
  EXPECT_EQ(m.triangles.size(), 12u);
  // fan of "f 1 3 4 2"
  EXPECT_EQ(m.triangles[0], (TriangleIndices{0, 2, 3}));
  EXPECT_EQ(m.triangles[1], (TriangleIndices{0, 3, 1}));
}

TEST(Obj, UvIndices) {
  auto m = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nf 1/1 2/2 3/3\n");
  ASSERT_TRUE(m.has_uvs());
  EXPECT_EQ(m.uvs.size(), 3u);
  ASSERT_EQ(m.uv_triangles.size(), 1u);
  EXPECT_EQ(m.uv_triangles[0], (TriangleIndices{0, 1, 2}));
}

TEST(Obj, NormalsAndGroupsIgnored) {
  auto m = parse(
      "# comment\no thing\ng grp\ns off\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\n"
      "vn 0 0 1\nusemtl x\nf 1/1/1 2/2/1 3/3/1\n");
  EXPECT_EQ(m.triangles.size(), 1u);
  EXPECT_TRUE(m.has_uvs());
}

TEST(Obj, NegativeIndices) {
  auto m = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n");
  EXPECT_EQ(m.triangles[0], (TriangleIndices{0, 1, 2}));
}

TEST(Obj, MalformedRecordReportsLine) {
  try {
    parse("v 0 0 0\nv 1 0 0\nv 0 1 zz\nf 1 2 3\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse("v 0 0 0\nbogus 1 2\n"), ParseError);
  EXPECT_THROW(parse("v 0 0 0\nv 1 0 0\nf 1 2\n"), ParseError);
}

TEST(Obj, MissingIndexIsIndexError) {
  EXPECT_THROW(parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n"), IndexError);
  EXPECT_THROW(parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf 1/1 2/2 3/1\n"), IndexError);
}

TEST(Obj, RoundTripIsExact) {
  Rng rng(5);
  TriangleMesh m;
  for (int i = 0; i < 40; ++i) {
    m.positions.emplace_back(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
    m.uvs.emplace_back(rng.uniform(0, 1), rng.uniform(0, 1));
  }
  for (int i = 0; i < 30; ++i) {
    TriangleIndices t{static_cast<int>(rng.uniform_int(0, 39)), static_cast<int>(rng.uniform_int(0, 39)),
                      static_cast<int>(rng.uniform_int(0, 39))};
    m.triangles.push_back(t);
    m.uv_triangles.push_back(t);
  }
  std::ostringstream out;
  write_obj(m, out);
  auto back = parse(out.str());
  EXPECT_EQ(back.positions, m.positions);
  EXPECT_EQ(back.triangles, m.triangles);
  EXPECT_EQ(back.uvs, m.uvs);
  EXPECT_EQ(back.uv_triangles, m.uv_triangles);
}

TEST(Normalize, CubeCornersAtUnitDistance) {
  auto n = normalize_mesh(cube(2.0));
  for (const auto& p : n.mesh.positions) EXPECT_NEAR(p.norm(), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(n.scale, 1.0 / std::sqrt(12.0));
}

TEST(Normalize, AlreadyNormalizedIsIdentity) {
  auto m = cube(1.0 / std::sqrt(3.0));
  auto n = normalize_mesh(m);
  for (std::size_t i = 0; i < m.positions.size(); ++i)
    EXPECT_NEAR((n.mesh.positions[i] - m.positions[i]).cwiseAbs().maxCoeff(), 0.0, 1e-15);
  EXPECT_NEAR(n.scale, 1.0, 1e-15);
  EXPECT_NEAR(n.translation.norm(), 0.0, 1e-15);
}

TEST(Normalize, TranslatedTriangleCentred) {
  auto m = parse("v 5 0 0\nv 6 0 0\nv 5 1 0\nf 1 2 3\n");
  auto n = normalize_mesh(m);
  Vec3 c = Vec3::Zero();
  for (const auto& p : n.mesh.positions) c += p;
  EXPECT_NEAR(c.norm() / 3.0, 0.0, 1e-15);
  double r = 0;
  for (const auto& p : n.mesh.positions) r = std::max(r, p.norm());
  EXPECT_NEAR(r, 1.0, 1e-15);
}

TEST(Normalize, DropsDegenerateAndRejectsAllDegenerate) {
  auto m = parse("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 2 0 0\nf 1 2 3\nf 1 2 4\n");
  auto n = normalize_mesh(m);
  EXPECT_EQ(n.mesh.triangles.size(), 1u);
  EXPECT_EQ(n.dropped_degenerate, 1u);
  EXPECT_THROW(normalize_mesh(parse("v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n")), Error);
}

TEST(Normalize, IdempotentProperty) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    TriangleMesh m;
    for (int i = 0; i < 30; ++i)
      m.positions.emplace_back(rng.uniform(-5, 7), rng.uniform(-2, 3), rng.uniform(0, 9));
    for (int i = 0; i < 10; ++i) m.triangles.push_back({3 * i, 3 * i + 1, 3 * i + 2});
    auto once = normalize_mesh(m).mesh;
    auto twice = normalize_mesh(once).mesh;
    ASSERT_EQ(once.positions.size(), twice.positions.size());
    for (std::size_t i = 0; i < once.positions.size(); ++i)
      EXPECT_LT((once.positions[i] - twice.positions[i]).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Assets, CubeFilesLoad) {
  auto a = load_obj(SDSTEX_ASSET_DIR "/cube.obj");
  EXPECT_EQ(a.triangles.size(), 12u);
  auto b = load_obj(SDSTEX_ASSET_DIR "/cube_uv.obj");
  EXPECT_EQ(b.triangles.size(), 12u);
  EXPECT_TRUE(b.has_uvs());
  for (const auto& uv : b.uvs) {
    EXPECT_GE(uv.minCoeff(), 0.0);
    EXPECT_LE(uv.maxCoeff(), 1.0);
  }
}
