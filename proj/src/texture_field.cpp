#include "sdstex/texture_field.hpp"

#include "sdstex/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace sdstex {

namespace {

double sigmoid(double z) {
  constexpr double lo = std::numeric_limits<double>::denorm_min();
  const double hi = std::nextafter(1.0, 0.0);
  return std::clamp(1.0 / (1.0 + std::exp(-z)), lo, hi);
}

}  // namespace

void HashGridConfig::validate() const {
  if (levels < 1) throw ConfigError("hash_grid.levels", "must be >= 1");
  if (features_per_level < 1) throw ConfigError("hash_grid.features_per_level", "must be >= 1");
  if (table_size_log2 < 4 || table_size_log2 > 24)
    throw ConfigError("hash_grid.table_size_log2", "must be in [4, 24]");
  if (base_resolution < 1) throw ConfigError("hash_grid.base_resolution", "must be >= 1");
  if (!(growth_factor >= 1.0)) throw ConfigError("hash_grid.growth_factor", "must be >= 1");
}

int HashGridConfig::resolution(int level) const {
  return static_cast<int>(std::floor(base_resolution * std::pow(growth_factor, level)));
}

bool HashGridConfig::is_dense(int level) const {
  const auto side = static_cast<std::uint64_t>(resolution(level)) + 1;
  return side * side * side <= table_size();
}

std::size_t HashGridConfig::parameter_count() const {
  const auto lf = static_cast<std::size_t>(feature_count());
  return static_cast<std::size_t>(levels) * table_size() * features_per_level + 3 * lf + 3;
}

std::size_t hash_index(const HashGridConfig& config, int level, const LatticeCoord& coord) {
  const std::uint64_t x = coord[0], y = coord[1], z = coord[2];
  if (config.is_dense(level)) {
    const std::uint64_t side = static_cast<std::uint64_t>(config.resolution(level)) + 1;
    return static_cast<std::size_t>(x + side * (y + side * z));
  }
  const std::uint64_t h = (x * 1ULL) ^ (y * 2654435761ULL) ^ (z * 805459861ULL);
  return static_cast<std::size_t>(h % config.table_size());
}

TextureField::TextureField(const HashGridConfig& config) : config_(config) {
  config_.validate();
  levels_.resize(config_.levels);
  for (int l = 0; l < config_.levels; ++l) {
    levels_[l].resolution = config_.resolution(l);
    levels_[l].dense = config_.is_dense(l);
    levels_[l].side = static_cast<std::uint64_t>(levels_[l].resolution) + 1;
  }
  params_.assign(config_.parameter_count(), 0.0);
}

std::size_t TextureField::table_offset(int level, std::size_t row) const {
  return (static_cast<std::size_t>(level) * config_.table_size() + row) *
         config_.features_per_level;
}

std::size_t TextureField::weight_offset(int channel, int feature) const {
  const std::size_t base =
      static_cast<std::size_t>(config_.levels) * config_.table_size() * config_.features_per_level;
  return base + static_cast<std::size_t>(channel) * config_.feature_count() + feature;
}

std::size_t TextureField::bias_offset(int channel) const {
  return weight_offset(0, 0) + 3 * static_cast<std::size_t>(config_.feature_count()) + channel;
}

LevelStencil TextureField::stencil(int level, const Vec3& point) const {
  const LevelInfo& info = levels_[level];
  const int res = info.resolution;
  std::uint64_t lo[3];
  double w[3][2];
  for (int a = 0; a < 3; ++a) {
    const double pos = std::clamp((point[a] + 1.0) * 0.5, 0.0, 1.0) * res;
    const int c = std::min(static_cast<int>(pos), res - 1);
    lo[a] = static_cast<std::uint64_t>(c);
    w[a][1] = pos - c;
    w[a][0] = 1.0 - w[a][1];
  }
  LevelStencil s;
  const std::uint64_t mask = config_.table_size() - 1;
  int corner = 0;
  for (int dz = 0; dz < 2; ++dz) {
    const std::uint64_t z = lo[2] + dz;
    for (int dy = 0; dy < 2; ++dy) {
      const std::uint64_t y = lo[1] + dy;
      const double wyz = w[1][dy] * w[2][dz];
      for (int dx = 0; dx < 2; ++dx, ++corner) {
        const std::uint64_t x = lo[0] + dx;
        // Same mapping as hash_index(); T is a power of two.
        s.rows[corner] = static_cast<std::size_t>(
            info.dense ? x + info.side * (y + info.side * z)
                       : ((x * 1ULL) ^ (y * 2654435761ULL) ^ (z * 805459861ULL)) & mask);
        s.weights[corner] = w[0][dx] * wyz;
      }
    }
  }
  return s;
}

std::vector<LevelStencil> TextureField::stencils(const Vec3& point) const {
  std::vector<LevelStencil> out(static_cast<std::size_t>(config_.levels));
  for (int l = 0; l < config_.levels; ++l) out[l] = stencil(l, point);
  return out;
}

std::vector<double> TextureField::features(std::span<const LevelStencil> stencils) const {
  const int nf = config_.features_per_level;
  std::vector<double> feats(static_cast<std::size_t>(config_.feature_count()), 0.0);
  for (int l = 0; l < config_.levels; ++l) {
    const LevelStencil& s = stencils[l];
    for (int corner = 0; corner < 8; ++corner) {
      const double* row = &params_[table_offset(l, s.rows[corner])];
      for (int f = 0; f < nf; ++f) feats[l * nf + f] += s.weights[corner] * row[f];
    }
  }
  return feats;
}

std::vector<double> TextureField::features(const Vec3& point) const {
  return features(stencils(point));
}

TextureField init_random(const HashGridConfig& config, std::uint64_t seed) {
  TextureField field(config);
  Rng rng(seed);
  auto p = field.parameters();
  const std::size_t table_end = field.weight_offset(0, 0);
  for (std::size_t i = 0; i < table_end; ++i) p[i] = rng.uniform(-1e-2, 1e-2);
  const double s = 1.0 / std::sqrt(static_cast<double>(config.feature_count()));
  for (int c = 0; c < 3; ++c)
    for (int f = 0; f < config.feature_count(); ++f) p[field.weight_offset(c, f)] = rng.uniform(-s, s);
  return field;
}

Vec3 eval_color(const TextureField& field, const Vec3& point) {
  const auto feats = field.features(point);
  const auto p = field.parameters();
  Vec3 rgb;
  for (int c = 0; c < 3; ++c) {
    double z = p[field.bias_offset(c)];
    const double* w = &p[field.weight_offset(c, 0)];
    for (std::size_t f = 0; f < feats.size(); ++f) z += w[f] * feats[f];
    rgb[c] = sigmoid(z);
  }
  return rgb;
}

namespace {

// Visits every (index, value) term of the gradient. Table terms may repeat
// an index when two corners hash to the same row.
template <typename Sink>
void visit_color_gradient(const TextureField& field, const Vec3& point, const Vec3& upstream,
                          Sink&& sink) {
  const auto& cfg = field.config();
  const int nf = cfg.features_per_level;
  const auto stencils = field.stencils(point);
  const auto feats = field.features(stencils);
  const auto p = field.parameters();

  std::array<double, 3> dz{};
  for (int c = 0; c < 3; ++c) {
    double z = p[field.bias_offset(c)];
    const double* w = &p[field.weight_offset(c, 0)];
    for (std::size_t f = 0; f < feats.size(); ++f) z += w[f] * feats[f];
    const double y = sigmoid(z);
    dz[c] = y * (1.0 - y) * upstream[c];
  }

  std::vector<double> dfeat(feats.size(), 0.0);
  for (int c = 0; c < 3; ++c) {
    sink(field.bias_offset(c), dz[c]);
    for (std::size_t f = 0; f < feats.size(); ++f) {
      sink(field.weight_offset(c, static_cast<int>(f)), dz[c] * feats[f]);
      dfeat[f] += p[field.weight_offset(c, static_cast<int>(f))] * dz[c];
    }
  }

  for (int l = 0; l < cfg.levels; ++l) {
    const LevelStencil& s = stencils[l];
    for (int corner = 0; corner < 8; ++corner) {
      const std::size_t base = field.table_offset(l, s.rows[corner]);
      for (int f = 0; f < nf; ++f) sink(base + f, s.weights[corner] * dfeat[l * nf + f]);
    }
  }
}

}  // namespace

void accumulate_color_gradient(const TextureField& field, const Vec3& point, const Vec3& upstream,
                               std::span<double> gradient) {
  visit_color_gradient(field, point, upstream,
                       [&](std::size_t i, double v) { gradient[i] += v; });
}

SparseGradient eval_color_backward(const TextureField& field, const Vec3& point,
                                   const Vec3& upstream) {
  std::map<std::size_t, double> acc;
  visit_color_gradient(field, point, upstream, [&](std::size_t i, double v) { acc[i] += v; });
  SparseGradient out;
  out.reserve(acc.size());
  for (const auto& [i, v] : acc)
    if (v != 0.0) out.emplace_back(i, v);
  return out;
}

}  // namespace sdstex
