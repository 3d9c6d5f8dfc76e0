#include "sdstex/mesh.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>

namespace sdstex {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

double parse_double(std::string_view tok, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError(fmt::format("line {}: invalid number '{}'", line, tok), line);
  return v;
}

long parse_long(std::string_view tok, std::size_t line) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError(fmt::format("line {}: invalid index '{}'", line, tok), line);
  return v;
}

// OBJ indices are 1-based; negative values count back from the end.
int resolve_index(long raw, std::size_t count, std::size_t line, const char* what) {
  long idx = raw > 0 ? raw - 1 : static_cast<long>(count) + raw;
  if (raw == 0 || idx < 0 || idx >= static_cast<long>(count))
    throw IndexError(fmt::format("line {}: {} index {} out of range ({} defined)", line,
                                 what, raw, count));
  return static_cast<int>(idx);
}

}  // namespace

void TriangleMesh::validate() const {
  const auto np = static_cast<int>(positions.size());
  for (std::size_t i = 0; i < triangles.size(); ++i)
    for (int v : triangles[i])
      if (v < 0 || v >= np)
        throw IndexError(fmt::format("triangle {} references vertex {} of {}", i, v, np));
  if (uv_triangles.empty() != uvs.empty())
    throw Error("uvs and uv_triangles must be both present or both absent");
  if (!uv_triangles.empty()) {
    if (uv_triangles.size() != triangles.size())
      throw Error("uv_triangles must parallel triangles");
    const auto nu = static_cast<int>(uvs.size());
    for (std::size_t i = 0; i < uv_triangles.size(); ++i)
      for (int v : uv_triangles[i])
        if (v < 0 || v >= nu)
          throw IndexError(fmt::format("uv triangle {} references uv {} of {}", i, v, nu));
  }
}

TriangleMesh parse_obj(std::istream& in) {
  TriangleMesh mesh;
  std::size_t line_no = 0;
  std::size_t faces_with_uv = 0;
  std::size_t faces_without_uv = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv(line);
    if (auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
    const auto tok = split_ws(sv);
    if (tok.empty()) continue;
    const std::string_view kw = tok[0];
    if (kw == "v") {
      if (tok.size() != 4 && tok.size() != 5)
        throw ParseError(fmt::format("line {}: 'v' expects 3 coordinates", line_no), line_no);
      mesh.positions.emplace_back(parse_double(tok[1], line_no), parse_double(tok[2], line_no),
                                  parse_double(tok[3], line_no));
    } else if (kw == "vt") {
      if (tok.size() < 3 || tok.size() > 4)
        throw ParseError(fmt::format("line {}: 'vt' expects 2 coordinates", line_no), line_no);
      mesh.uvs.emplace_back(parse_double(tok[1], line_no), parse_double(tok[2], line_no));
    } else if (kw == "vn") {
      if (tok.size() != 4)
        throw ParseError(fmt::format("line {}: 'vn' expects 3 components", line_no), line_no);
      for (int k = 1; k < 4; ++k) parse_double(tok[k], line_no);
    } else if (kw == "f") {
      if (tok.size() < 4)
        throw ParseError(fmt::format("line {}: face needs at least 3 vertices", line_no),
                         line_no);
      std::vector<int> pos_idx;
      std::vector<int> uv_idx;
      for (std::size_t k = 1; k < tok.size(); ++k) {
        const std::string_view ref = tok[k];
        const auto s1 = ref.find('/');
        const std::string_view pv = ref.substr(0, s1);
        if (pv.empty())
          throw ParseError(fmt::format("line {}: malformed face vertex '{}'", line_no, ref),
                           line_no);
        pos_idx.push_back(
            resolve_index(parse_long(pv, line_no), mesh.positions.size(), line_no, "vertex"));
        if (s1 != std::string_view::npos) {
          const std::string_view rest = ref.substr(s1 + 1);
          const auto s2 = rest.find('/');
          const std::string_view tv = rest.substr(0, s2);
          if (!tv.empty())
            uv_idx.push_back(
                resolve_index(parse_long(tv, line_no), mesh.uvs.size(), line_no, "uv"));
          if (s2 != std::string_view::npos) {
            const std::string_view nv = rest.substr(s2 + 1);
            if (nv.empty() || nv.find('/') != std::string_view::npos)
              throw ParseError(fmt::format("line {}: malformed face vertex '{}'", line_no, ref),
                               line_no);
            parse_long(nv, line_no);
          }
        }
      }
      if (!uv_idx.empty() && uv_idx.size() != pos_idx.size())
        throw ParseError(fmt::format("line {}: face mixes vertices with and without uvs", line_no),
                         line_no);
      (uv_idx.empty() ? faces_without_uv : faces_with_uv) += 1;
      for (std::size_t k = 1; k + 1 < pos_idx.size(); ++k) {
        mesh.triangles.push_back({pos_idx[0], pos_idx[k], pos_idx[k + 1]});
        if (!uv_idx.empty()) mesh.uv_triangles.push_back({uv_idx[0], uv_idx[k], uv_idx[k + 1]});
      }
    } else if (kw == "o" || kw == "g" || kw == "s" || kw == "usemtl" || kw == "mtllib") {
      continue;
    } else {
      throw ParseError(fmt::format("line {}: unsupported record '{}'", line_no, kw), line_no);
    }
  }
  if (faces_with_uv > 0 && faces_without_uv > 0)
    throw Error("OBJ mixes faces with and without texture coordinates");
  if (mesh.uv_triangles.empty()) mesh.uvs.clear();
  mesh.validate();
  return mesh;
}

TriangleMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open mesh '{}'", path.string()));
  return parse_obj(in);
}

void write_obj(const TriangleMesh& mesh, std::ostream& out) {
  out << "# written by " << kToolVersion << "\n";
  for (const auto& p : mesh.positions) out << fmt::format("v {} {} {}\n", p.x(), p.y(), p.z());
  for (const auto& t : mesh.uvs) out << fmt::format("vt {} {}\n", t.x(), t.y());
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& f = mesh.triangles[i];
    if (mesh.has_uvs()) {
      const auto& u = mesh.uv_triangles[i];
      out << fmt::format("f {}/{} {}/{} {}/{}\n", f[0] + 1, u[0] + 1, f[1] + 1, u[1] + 1,
                         f[2] + 1, u[2] + 1);
    } else {
      out << fmt::format("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1);
    }
  }
}

void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write mesh '{}'", path.string()));
  write_obj(mesh, out);
}

double triangle_area(const TriangleMesh& mesh, std::size_t tri) {
  const auto& t = mesh.triangles[tri];
  const Vec3& a = mesh.positions[t[0]];
  return 0.5 * (mesh.positions[t[1]] - a).cross(mesh.positions[t[2]] - a).norm();
}

NormalizedMesh normalize_mesh(const TriangleMesh& mesh) {
  mesh.validate();
  if (mesh.positions.empty() || mesh.triangles.empty())
    throw Error("cannot normalize an empty mesh");

  Vec3 centroid = Vec3::Zero();
  for (const auto& p : mesh.positions) centroid += p;
  centroid /= static_cast<double>(mesh.positions.size());

  double radius = 0.0;
  for (const auto& p : mesh.positions) radius = std::max(radius, (p - centroid).norm());
  if (!(radius > 0.0)) throw Error("mesh is degenerate: all vertices coincide");

  NormalizedMesh out;
  out.translation = -centroid;
  out.scale = 1.0 / radius;
  out.mesh.positions.reserve(mesh.positions.size());
  for (const auto& p : mesh.positions) out.mesh.positions.push_back((p - centroid) * out.scale);
  out.mesh.uvs = mesh.uvs;

  TriangleMesh& m = out.mesh;
  m.triangles = mesh.triangles;
  std::vector<TriangleIndices> kept;
  std::vector<TriangleIndices> kept_uv;
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    if (triangle_area(m, i) < kDegenerateArea) {
      ++out.dropped_degenerate;
      continue;
    }
    kept.push_back(mesh.triangles[i]);
    if (mesh.has_uvs()) kept_uv.push_back(mesh.uv_triangles[i]);
  }
  if (kept.empty()) throw Error("mesh is degenerate: every triangle has zero area");
  m.triangles = std::move(kept);
  m.uv_triangles = std::move(kept_uv);
  return out;
}

}  // namespace sdstex
