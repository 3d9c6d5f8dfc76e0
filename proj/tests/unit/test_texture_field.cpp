#include "sdstex/random.hpp"
#include "sdstex/texture_field.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

using namespace sdstex;

namespace {

Vec3 random_point(Rng& rng, double r = 0.999) {
  return {rng.uniform(-r, r), rng.uniform(-r, r), rng.uniform(-r, r)};
}

TextureField wide_field(const HashGridConfig& cfg, std::uint64_t seed) {
  TextureField f = init_random(cfg, seed);
  auto p = f.parameters();
  for (std::size_t i = 0; i < f.weight_offset(0, 0); ++i) p[i] *= 40.0;
  return f;
}

}  // namespace

TEST(HashGrid, DefaultParameterCount) {
  HashGridConfig cfg;
  EXPECT_EQ(cfg.parameter_count(), 262195u);
  EXPECT_EQ(TextureField(cfg).parameter_count(), 262195u);
}

TEST(HashGrid, LevelResolutions) {
  HashGridConfig cfg;
  const int expect[] = {16, 24, 36, 54, 81, 121, 182, 273};
  for (int l = 0; l < 8; ++l) EXPECT_EQ(cfg.resolution(l), expect[l]);
  EXPECT_TRUE(cfg.is_dense(0));
  EXPECT_TRUE(cfg.is_dense(1));  // 25^3 = 15625 <= 16384
  for (int l = 2; l < 8; ++l) EXPECT_FALSE(cfg.is_dense(l));
}

TEST(HashGrid, ConfigValidation) {
  HashGridConfig cfg;
  cfg.table_size_log2 = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.table_size_log2 = 25;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.levels = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(HashIndex, DenseRowMajor) {
  HashGridConfig cfg;
  EXPECT_EQ(hash_index(cfg, 0, {0, 0, 0}), 0u);
  EXPECT_EQ(hash_index(cfg, 0, {1, 0, 0}), 1u);
  EXPECT_EQ(hash_index(cfg, 0, {0, 1, 0}), 17u);
  EXPECT_EQ(hash_index(cfg, 0, {0, 0, 1}), 289u);
}

TEST(HashIndex, HashedConstant) {
  // (1 ^ 2*2654435761 ^ 3*805459861) = 7187592668; mod 2^14 = 13788
  HashGridConfig cfg;
  EXPECT_EQ(hash_index(cfg, 2, {1, 2, 3}), 13788u);
}

TEST(HashIndex, StencilAgreesWithHashIndex) {
  HashGridConfig cfg;
  TextureField f(cfg);
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec3 p = random_point(rng, 1.0);
    for (int l = 0; l < cfg.levels; ++l) {
      const LevelStencil s = f.stencil(l, p);
      const int res = cfg.resolution(l);
      std::uint32_t lo[3];
      for (int a = 0; a < 3; ++a)
        lo[a] = static_cast<std::uint32_t>(std::min(res - 1, static_cast<int>(std::floor((p[a] + 1) / 2 * res))));
      for (int corner = 0; corner < 8; ++corner) {
        LatticeCoord c{lo[0] + (corner & 1), lo[1] + ((corner >> 1) & 1), lo[2] + ((corner >> 2) & 1)};
        EXPECT_EQ(s.rows[corner], hash_index(cfg, l, c));
      }
      double wsum = 0;
      for (double w : s.weights) wsum += w;
      EXPECT_NEAR(wsum, 1.0, 1e-14);
    }
  }
}

TEST(InitRandom, DeterministicAndSeedSensitive) {
  HashGridConfig cfg;
  auto a = init_random(cfg, 0), b = init_random(cfg, 0), c = init_random(cfg, 1);
  EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
  EXPECT_FALSE(std::equal(a.parameters().begin(), a.parameters().end(), c.parameters().begin()));
}

TEST(InitRandom, Ranges) {
  HashGridConfig cfg;
  auto f = init_random(cfg, 9);
  auto p = f.parameters();
  const double s = 1.0 / std::sqrt(16.0);
  for (std::size_t i = 0; i < f.weight_offset(0, 0); ++i) ASSERT_LE(std::abs(p[i]), 1e-2);
  for (int c = 0; c < 3; ++c) {
    for (int k = 0; k < 16; ++k) ASSERT_LE(std::abs(p[f.weight_offset(c, k)]), s);
    EXPECT_EQ(p[f.bias_offset(c)], 0.0);
  }
}

TEST(EvalColor, ConstantTablesGiveConstantColour) {
  HashGridConfig cfg;
  cfg.levels = 1;
  cfg.features_per_level = 3;
  TextureField f(cfg);
  auto p = f.parameters();
  for (std::size_t i = 0; i < f.weight_offset(0, 0); ++i) p[i] = 0.7;
  for (int c = 0; c < 3; ++c) p[f.weight_offset(c, c)] = 1.0;
  Rng rng(1);
  const double expect = 1.0 / (1.0 + std::exp(-0.7));
  for (int i = 0; i < 50; ++i) {
    Vec3 c = eval_color(f, random_point(rng));
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(c[k], expect, 1e-15);
  }
}

TEST(EvalColor, LatticeCornerSelectsEntry) {
  HashGridConfig cfg;
  cfg.levels = 1;
  TextureField f = wide_field(cfg, 4);
  // level-0 resolution 16: point (-1 + 2*3/16, ...) sits on lattice (3, 5, 7)
  const Vec3 p(-1 + 6.0 / 16, -1 + 10.0 / 16, -1 + 14.0 / 16);
  const auto feats = f.features(p);
  const std::size_t row = hash_index(cfg, 0, {3, 5, 7});
  EXPECT_DOUBLE_EQ(feats[0], f.parameters()[f.table_offset(0, row)]);
  EXPECT_DOUBLE_EQ(feats[1], f.parameters()[f.table_offset(0, row) + 1]);
}

TEST(EvalColor, MatchesBruteForceOracle) {
  HashGridConfig cfg;
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    TextureField f = wide_field(cfg, 100 + trial);
    for (int i = 0; i < 50; ++i) {
      const Vec3 p = random_point(rng);
      const Vec3 a = eval_color(f, p), b = oracle::brute_force_color(f, p);
      ASSERT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(EvalColor, OutputInOpenUnitInterval) {
  HashGridConfig cfg;
  TextureField f = init_random(cfg, 2);
  auto p = f.parameters();
  for (int c = 0; c < 3; ++c) p[f.bias_offset(c)] = c == 0 ? 800.0 : (c == 1 ? -800.0 : 0.0);
  const Vec3 col = eval_color(f, Vec3(0.1, 0.2, 0.3));
  for (int c = 0; c < 3; ++c) {
    EXPECT_GT(col[c], 0.0);
    EXPECT_LT(col[c], 1.0);
  }
}

TEST(EvalColor, LipschitzWithinCell) {
  HashGridConfig cfg;
  cfg.levels = 2;
  TextureField f = wide_field(cfg, 8);
  // per channel: sigmoid' <= 1/4 and |grad feature| <= sqrt(3) * res * max|table|
  double wmax = 0, tmax = 0;
  auto p = f.parameters();
  for (std::size_t i = 0; i < f.weight_offset(0, 0); ++i) tmax = std::max(tmax, std::abs(p[i]));
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < cfg.feature_count(); ++k) wmax = std::max(wmax, std::abs(p[f.weight_offset(c, k)]));
  double K = 0;
  for (int l = 0; l < cfg.levels; ++l) K += 0.25 * wmax * cfg.features_per_level * tmax * cfg.resolution(l) * std::sqrt(3.0);
  K *= std::sqrt(3.0);  // three channels
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const Vec3 a = random_point(rng);
    const Vec3 b = a + Vec3(rng.uniform(-1e-3, 1e-3), rng.uniform(-1e-3, 1e-3), rng.uniform(-1e-3, 1e-3));
    EXPECT_LE((eval_color(f, a) - eval_color(f, b)).norm(), K * (a - b).norm() + 1e-15);
  }
}

TEST(Backward, ZeroUpstreamGivesZeroGradient) {
  TextureField f = init_random(HashGridConfig{}, 1);
  EXPECT_TRUE(eval_color_backward(f, Vec3(0.3, -0.2, 0.5), Vec3::Zero()).empty());
}

TEST(Backward, SupportBounded) {
  HashGridConfig cfg;
  TextureField f = wide_field(cfg, 6);
  Rng rng(6);
  const std::size_t decoder = f.weight_offset(0, 0);
  for (int i = 0; i < 100; ++i) {
    auto g = eval_color_backward(f, random_point(rng), Vec3(rng.normal(), rng.normal(), rng.normal()));
    std::set<std::size_t> rows;
    for (const auto& [k, v] : g)
      if (k < decoder) rows.insert(k / cfg.features_per_level);
    EXPECT_LE(rows.size(), static_cast<std::size_t>(8 * cfg.levels));
    for (std::size_t j = 1; j < g.size(); ++j) EXPECT_LT(g[j - 1].first, g[j].first);
  }
}

TEST(Backward, DisjointCellsDisjointSupport) {
  HashGridConfig cfg;
  cfg.levels = 1;
  TextureField f = wide_field(cfg, 7);
  auto a = eval_color_backward(f, Vec3(-0.9, -0.9, -0.9), Vec3(1, 1, 1));
  auto b = eval_color_backward(f, Vec3(0.5, 0.5, 0.5), Vec3(1, 1, 1));
  const std::size_t decoder = f.weight_offset(0, 0);
  std::set<std::size_t> sa;
  for (const auto& [k, v] : a)
    if (k < decoder) sa.insert(k);
  for (const auto& [k, v] : b)
    if (k < decoder) EXPECT_FALSE(sa.count(k));
}

TEST(Backward, SparseMatchesDense) {
  HashGridConfig cfg;
  TextureField f = wide_field(cfg, 12);
  const Vec3 p(0.1, -0.4, 0.77), up(0.3, -1.2, 0.8);
  std::vector<double> dense(f.parameter_count(), 0.0);
  accumulate_color_gradient(f, p, up, dense);
  auto sparse = eval_color_backward(f, p, up);
  std::vector<double> expand(f.parameter_count(), 0.0);
  for (const auto& [k, v] : sparse) expand[k] = v;
  EXPECT_EQ(dense, expand);
}

TEST(Backward, CentralDifferencesOnEveryTouchedParameter) {
  HashGridConfig cfg;
  for (int trial = 0; trial < 5; ++trial) {
    TextureField f = wide_field(cfg, 30 + trial);
    Rng rng(40 + trial);
    const Vec3 p = random_point(rng), up(rng.normal(), rng.normal(), rng.normal());
    const Vec3 base = eval_color(f, p);
    auto params = f.parameters();
    for (const auto& [k, g] : eval_color_backward(f, p, up)) {
      const double orig = params[k];
      auto L = [&](double d) {
        params[k] = orig + d;
        const double v = up.dot(eval_color(f, p) - base);
        params[k] = orig;
        return v;
      };
      const double h = 0.03;
      const double fd = (L(3 * h) - 9 * L(2 * h) + 45 * L(h) - 45 * L(-h) + 9 * L(-2 * h) - L(-3 * h)) / (60 * h);
      EXPECT_LT(std::abs(g - fd) / std::max(std::abs(g), std::abs(fd)), 1e-5) << "param " << k;
    }
  }
}

TEST(Checkpoint, RoundTrip) {
  HashGridConfig cfg;
  cfg.table_size_log2 = 10;
  TextureField f = wide_field(cfg, 77);
  const auto path = std::filesystem::temp_directory_path() / "sdstex_ckpt_test.bin";
  save_checkpoint(f, path);
  TextureField g = load_checkpoint(path);
  EXPECT_EQ(g.config(), f.config());
  EXPECT_TRUE(std::equal(f.parameters().begin(), f.parameters().end(), g.parameters().begin()));
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsForeignFile) {
  const auto path = std::filesystem::temp_directory_path() / "sdstex_not_ckpt.bin";
  {
    std::ofstream out(path);
    out << "hello world, definitely not a checkpoint";
  }
  EXPECT_THROW(load_checkpoint(path), Error);
  std::filesystem::remove(path);
}
