#pragma once

#include "sdstex/common.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace sdstex {

// Multiresolution hash-grid layout over the cube [-1,1]^3.
struct HashGridConfig {
  int levels = 8;
  int base_resolution = 16;
  double growth_factor = 1.5;
  int features_per_level = 2;
  int table_size_log2 = 14;

  void validate() const;
  int resolution(int level) const;
  std::size_t table_size() const { return std::size_t{1} << table_size_log2; }
  // A level is stored densely when its (res+1)^3 lattice fits in the table.
  bool is_dense(int level) const;
  int feature_count() const { return levels * features_per_level; }
  std::size_t parameter_count() const;

  bool operator==(const HashGridConfig&) const = default;
};

using LatticeCoord = std::array<std::uint32_t, 3>;

// Table row for a lattice point: row-major when the level is dense,
// otherwise (x ^ y*2654435761 ^ z*805459861) mod T in 64-bit arithmetic.
std::size_t hash_index(const HashGridConfig& config, int level, const LatticeCoord& coord);

// Trilinear stencil of one level: 8 table rows and their weights.
struct LevelStencil {
  std::array<std::size_t, 8> rows{};
  std::array<double, 8> weights{};
};

// The optimizable texture. Parameters are one flat vector laid out as
//   tables   [level][row][feature]           L*T*F
//   weights  [channel][feature]  (3 x L*F)   decoder matrix
//   biases   [channel]                       3
// Output colour is sigmoid(W * features + b).
class TextureField {
 public:
  TextureField() = default;
  explicit TextureField(const HashGridConfig& config);

  const HashGridConfig& config() const { return config_; }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  std::size_t table_offset(int level, std::size_t row) const;
  std::size_t weight_offset(int channel, int feature) const;
  std::size_t bias_offset(int channel) const;

  LevelStencil stencil(int level, const Vec3& point) const;
  std::vector<LevelStencil> stencils(const Vec3& point) const;
  // Concatenated interpolated features of all levels (length L*F).
  std::vector<double> features(const Vec3& point) const;
  std::vector<double> features(std::span<const LevelStencil> stencils) const;

 private:
  struct LevelInfo {
    int resolution = 0;
    bool dense = false;
    std::uint64_t side = 0;
  };

  HashGridConfig config_;
  std::vector<LevelInfo> levels_;
  std::vector<double> params_;
};

TextureField init_random(const HashGridConfig& config, std::uint64_t seed);

Vec3 eval_color(const TextureField& field, const Vec3& point);

// Adds d(upstream . color)/d(params) into `gradient` (dense, parameter-sized).
void accumulate_color_gradient(const TextureField& field, const Vec3& point,
                               const Vec3& upstream, std::span<double> gradient);

// Sparse form of the same gradient: (parameter index, value) pairs, indices
// sorted ascending and unique.
using SparseGradient = std::vector<std::pair<std::size_t, double>>;
SparseGradient eval_color_backward(const TextureField& field, const Vec3& point,
                                   const Vec3& upstream);

// Versioned little-endian binary checkpoint.
void save_checkpoint(const TextureField& field, const std::filesystem::path& path);
TextureField load_checkpoint(const std::filesystem::path& path);

}  // namespace sdstex
