#include "sdstex/texture_field.hpp"

#include <fmt/format.h>

#include <array>
#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace sdstex {

namespace {

constexpr std::array<char, 8> kMagic = {'S', 'D', 'S', 'T', 'E', 'X', 'F', 'D'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), bytes.size())) throw Error("checkpoint truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

void save_checkpoint(const TextureField& field, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write checkpoint '{}'", path.string()));
  const auto& c = field.config();
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::int32_t>(out, c.levels);
  put_le<std::int32_t>(out, c.base_resolution);
  put_le<double>(out, c.growth_factor);
  put_le<std::int32_t>(out, c.features_per_level);
  put_le<std::int32_t>(out, c.table_size_log2);
  put_le<std::uint64_t>(out, field.parameter_count());
  for (double v : field.parameters()) put_le<double>(out, v);
  if (!out) throw Error(fmt::format("failed writing checkpoint '{}'", path.string()));
}

TextureField load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open checkpoint '{}'", path.string()));
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic)
    throw Error(fmt::format("'{}' is not a texture-field checkpoint", path.string()));
  const auto version = get_le<std::uint32_t>(in);
  if (version != kVersion) throw Error(fmt::format("unsupported checkpoint version {}", version));
  HashGridConfig c;
  c.levels = get_le<std::int32_t>(in);
  c.base_resolution = get_le<std::int32_t>(in);
  c.growth_factor = get_le<double>(in);
  c.features_per_level = get_le<std::int32_t>(in);
  c.table_size_log2 = get_le<std::int32_t>(in);
  TextureField field(c);
  const auto count = get_le<std::uint64_t>(in);
  if (count != field.parameter_count())
    throw Error(fmt::format("checkpoint holds {} parameters, config implies {}", count,
                            field.parameter_count()));
  for (double& v : field.parameters()) v = get_le<double>(in);
  return field;
}

}  // namespace sdstex
