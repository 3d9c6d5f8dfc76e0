#include "sdstex/run_config.hpp"

#include "sdstex/image.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace sdstex {
namespace {

namespace fs = std::filesystem;

std::string join_key(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

template <class T>
T scalar_as(const YAML::Node& node, const std::string& key, const char* what) {
  if (!node.IsScalar()) throw ConfigError(key, fmt::format("expected {}", what));
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(key, fmt::format("expected {}, got '{}'", what, node.Scalar()));
  }
}

double read_double(const YAML::Node& n, const std::string& key) {
  return scalar_as<double>(n, key, "a number");
}

int read_int(const YAML::Node& n, const std::string& key) {
  return scalar_as<int>(n, key, "an integer");
}

bool read_bool(const YAML::Node& n, const std::string& key) {
  return scalar_as<bool>(n, key, "a boolean");
}

std::string read_string(const YAML::Node& n, const std::string& key) {
  return scalar_as<std::string>(n, key, "a string");
}

std::vector<double> read_numbers(const YAML::Node& n, const std::string& key, std::size_t count) {
  if (!n.IsSequence() || n.size() != count)
    throw ConfigError(key, fmt::format("expected a list of {} numbers", count));
  std::vector<double> out;
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(read_double(n[i], fmt::format("{}[{}]", key, i)));
  return out;
}

Vec3 read_vec3(const YAML::Node& n, const std::string& key) {
  auto v = read_numbers(n, key, 3);
  return Vec3(v[0], v[1], v[2]);
}

Range read_range(const YAML::Node& n, const std::string& key) {
  auto v = read_numbers(n, key, 2);
  return Range{v[0], v[1]};
}

fs::path resolve_path(const fs::path& base, const std::string& text) {
  if (text.empty()) return {};
  fs::path p(text);
  if (p.is_relative()) p = base / p;
  return fs::absolute(p).lexically_normal();
}

// A mapping whose keys must all be consumed; finish() rejects leftovers.
class Section {
 public:
  Section(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap())
      throw ConfigError(path_, "expected a mapping");
  }

  YAML::Node take(const std::string& key) {
    used_.insert(key);
    if (!node_ || node_.IsNull()) return YAML::Node();
    const YAML::Node& n = node_;
    return n[key];
  }
  std::string key(const std::string& k) const { return join_key(path_, k); }

  template <class F>
  void with(const std::string& k, F&& fn) {
    YAML::Node n = take(k);
    if (n && !n.IsNull()) fn(n, key(k));
  }

  void finish() const {
    if (!node_ || node_.IsNull()) return;
    for (const auto& kv : node_) {
      auto k = kv.first.as<std::string>();
      if (!used_.count(k)) throw ConfigError(key(k), "unknown key");
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> used_;
};

TargetSpec read_target(const YAML::Node& node, const std::string& path, const fs::path& base) {
  TargetSpec t;
  Section s(node, path);
  s.with("kind", [&](auto& n, auto k) { t.kind = read_string(n, k); });
  s.with("color", [&](auto& n, auto k) { t.colors = {read_vec3(n, k)}; });
  s.with("colors", [&](auto& n, auto k) {
    if (!n.IsSequence()) throw ConfigError(k, "expected a list of colours");
    t.colors.clear();
    for (std::size_t i = 0; i < n.size(); ++i)
      t.colors.push_back(read_vec3(n[i], fmt::format("{}[{}]", k, i)));
  });
  s.with("cells", [&](auto& n, auto k) { t.cells = read_double(n, k); });
  s.with("axis", [&](auto& n, auto k) { t.axis = read_int(n, k); });
  s.with("path", [&](auto& n, auto k) { t.path = resolve_path(base, read_string(n, k)); });
  s.finish();

  const std::size_t want = t.kind == "solid" ? 1 : (t.kind == "image" ? 0 : 2);
  if (t.kind != "solid" && t.kind != "checkerboard" && t.kind != "gradient" && t.kind != "image")
    throw ConfigError(join_key(path, "kind"),
                      "unknown target kind '" + t.kind + "' (solid, checkerboard, gradient, image)");
  if (t.kind == "image" && t.path.empty())
    throw ConfigError(join_key(path, "path"), "image targets need a path");
  if (want > 0 && t.colors.size() != want)
    throw ConfigError(join_key(path, "colors"),
                      fmt::format("'{}' targets take {} colour(s)", t.kind, want));
  if (t.kind == "gradient" && (t.axis < 0 || t.axis > 2))
    throw ConfigError(join_key(path, "axis"), "must be 0, 1 or 2");
  if (t.kind == "checkerboard" && !(t.cells > 0))
    throw ConfigError(join_key(path, "cells"), "must be positive");
  return t;
}

ConditionSpec read_condition(const YAML::Node& node, const std::string& path,
                             const std::string& kind, const fs::path& base) {
  ConditionSpec c;
  Section s(node, path);
  if (kind == "delta") {
    YAML::Node t = s.take("target");
    if (!t) throw ConfigError(s.key("target"), "missing");
    c.target = read_target(t, s.key("target"), base);
  } else if (kind == "mixture") {
    YAML::Node modes = s.take("modes");
    if (!modes || !modes.IsSequence() || modes.size() == 0)
      throw ConfigError(s.key("modes"), "expected a non-empty list");
    for (std::size_t i = 0; i < modes.size(); ++i) {
      const std::string mk = fmt::format("{}[{}]", s.key("modes"), i);
      Section ms(modes[i], mk);
      ModeSpec m;
      ms.with("weight", [&](auto& n, auto k) { m.weight = read_double(n, k); });
      YAML::Node t = ms.take("target");
      if (!t) throw ConfigError(ms.key("target"), "missing");
      m.target = read_target(t, ms.key("target"), base);
      ms.finish();
      c.modes.push_back(std::move(m));
    }
  } else {
    for (const char* k : {"near", "far"}) {
      YAML::Node t = s.take(k);
      if (!t) throw ConfigError(s.key(k), "missing");
      (std::string(k) == "near" ? c.near_target : c.far_target) = read_target(t, s.key(k), base);
    }
    s.with("threshold", [&](auto& n, auto k) { c.threshold = read_double(n, k); });
    s.with("invert", [&](auto& n, auto k) { c.invert = read_bool(n, k); });
  }
  s.finish();
  return c;
}

OracleSpec read_oracle(const YAML::Node& node, const fs::path& base) {
  OracleSpec o;
  Section s(node, "oracle");
  s.with("kind", [&](auto& n, auto k) { o.kind = read_string(n, k); });
  if (o.kind != "delta" && o.kind != "mixture" && o.kind != "depth_routed")
    throw ConfigError("oracle.kind",
                      "unknown oracle kind '" + o.kind + "' (delta, mixture, depth_routed)");
  s.with("fallback_without_depth",
         [&](auto& n, auto k) { o.fallback_without_depth = read_bool(n, k); });
  YAML::Node conds = s.take("conditions");
  if (!conds || !conds.IsMap() || conds.size() == 0)
    throw ConfigError("oracle.conditions", "expected a mapping of condition ids");
  for (const auto& kv : conds) {
    auto id = kv.first.as<std::string>();
    o.conditions[id] = read_condition(kv.second, "oracle.conditions." + id, o.kind, base);
  }
  s.finish();
  return o;
}

std::string flow_text(const YAML::Node& node) {
  YAML::Emitter e;
  e.SetSeqFormat(YAML::Flow);
  e.SetMapFormat(YAML::Flow);
  e << node;
  return e.c_str();
}

std::string num(double v) { return fmt::format("{}", v); }

void emit_vec3(YAML::Emitter& e, const Vec3& v) {
  e << YAML::Flow << YAML::BeginSeq << num(v.x()) << num(v.y()) << num(v.z()) << YAML::EndSeq;
}

void emit_range(YAML::Emitter& e, const Range& r) {
  e << YAML::Flow << YAML::BeginSeq << num(r.lo) << num(r.hi) << YAML::EndSeq;
}

void emit_target(YAML::Emitter& e, const TargetSpec& t) {
  e << YAML::BeginMap << YAML::Key << "kind" << YAML::Value << t.kind;
  if (t.kind == "solid") {
    e << YAML::Key << "color" << YAML::Value;
    emit_vec3(e, t.colors.at(0));
  } else if (t.kind == "image") {
    e << YAML::Key << "path" << YAML::Value << t.path.string();
  } else {
    e << YAML::Key << "colors" << YAML::Value << YAML::BeginSeq;
    for (const auto& c : t.colors) emit_vec3(e, c);
    e << YAML::EndSeq;
    if (t.kind == "checkerboard") e << YAML::Key << "cells" << YAML::Value << num(t.cells);
    if (t.kind == "gradient") e << YAML::Key << "axis" << YAML::Value << t.axis;
  }
  e << YAML::EndMap;
}

}  // namespace

RunConfig parse_run_config(std::string_view yaml, const fs::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml));
  } catch (const YAML::Exception& ex) {
    throw ConfigError("", fmt::format("YAML syntax error at line {}: {}", ex.mark.line + 1, ex.msg));
  }
  RunConfig c;
  Section top(root, "");
  top.take("tool_version");
  top.with("mesh", [&](auto& n, auto k) { c.mesh = resolve_path(base_dir, read_string(n, k)); });
  top.with("output", [&](auto& n, auto k) {
    c.output_dir = resolve_path(base_dir, read_string(n, k));
  });
  top.with("seed", [&](auto& n, auto k) {
    c.sds.seed = scalar_as<std::uint64_t>(n, k, "a non-negative integer");
  });
  top.with("threads", [&](auto& n, auto k) { c.sds.threads = read_int(n, k); });

  {
    Section s(top.take("sds"), "sds");
    auto& d = c.sds;
    s.with("batch_size", [&](auto& n, auto k) { d.batch_size = read_int(n, k); });
    s.with("elevation_range", [&](auto& n, auto k) { d.elevation = read_range(n, k); });
    s.with("azimuth_range", [&](auto& n, auto k) { d.azimuth = read_range(n, k); });
    s.with("camera_distance_range", [&](auto& n, auto k) { d.distance = read_range(n, k); });
    s.with("t_frac_range", [&](auto& n, auto k) { d.t_frac = read_range(n, k); });
    s.with("guidance_scale", [&](auto& n, auto k) { d.guidance_scale = read_double(n, k); });
    s.with("steps", [&](auto& n, auto k) { d.steps = read_int(n, k); });
    s.with("lr", [&](auto& n, auto k) { d.adam.lr = read_double(n, k); });
    s.with("adam_betas", [&](auto& n, auto k) {
      auto b = read_numbers(n, k, 2);
      d.adam.beta1 = b[0];
      d.adam.beta2 = b[1];
    });
    s.with("adam_eps", [&](auto& n, auto k) { d.adam.eps = read_double(n, k); });
    s.with("clip_max_norm", [&](auto& n, auto k) { d.clip_max_norm = read_double(n, k); });
    s.with("depth_conditioning",
           [&](auto& n, auto k) { d.depth_conditioning = read_bool(n, k); });
    s.with("condition", [&](auto& n, auto k) { d.condition = read_string(n, k); });
    s.with("negative_condition",
           [&](auto& n, auto k) { d.negative_condition = read_string(n, k); });
    s.finish();
  }
  {
    Section s(top.take("render"), "render");
    s.with("resolution", [&](auto& n, auto k) { c.sds.resolution = read_int(n, k); });
    s.with("fov", [&](auto& n, auto k) { c.sds.fov = read_double(n, k); });
    s.with("background", [&](auto& n, auto k) { c.sds.background = read_double(n, k); });
    s.finish();
  }
  {
    Section s(top.take("hash_grid"), "hash_grid");
    auto& g = c.grid;
    s.with("levels", [&](auto& n, auto k) { g.levels = read_int(n, k); });
    s.with("base_resolution", [&](auto& n, auto k) { g.base_resolution = read_int(n, k); });
    s.with("growth_factor", [&](auto& n, auto k) { g.growth_factor = read_double(n, k); });
    s.with("features_per_level",
           [&](auto& n, auto k) { g.features_per_level = read_int(n, k); });
    s.with("table_size_log2", [&](auto& n, auto k) { g.table_size_log2 = read_int(n, k); });
    s.finish();
    try {
      g.validate();
    } catch (const Error& ex) {
      throw ConfigError("hash_grid", ex.what());
    }
  }
  {
    Section s(top.take("schedule"), "schedule");
    s.with("steps", [&](auto& n, auto k) { c.schedule.steps = read_int(n, k); });
    s.with("beta_start", [&](auto& n, auto k) { c.schedule.beta_start = read_double(n, k); });
    s.with("beta_end", [&](auto& n, auto k) { c.schedule.beta_end = read_double(n, k); });
    s.with("weighting", [&](auto& n, auto k) { c.schedule.weighting = read_string(n, k); });
    s.finish();
    if (c.schedule.weighting != "one_minus_alpha_bar" && c.schedule.weighting != "unit")
      throw ConfigError("schedule.weighting", "expected one_minus_alpha_bar or unit");
  }
  {
    YAML::Node o = top.take("oracle");
    if (o) c.oracle = read_oracle(o, base_dir);
  }
  {
    Section s(top.take("generate"), "generate");
    auto& g = c.generate;
    s.with("snapshot_every", [&](auto& n, auto k) { g.snapshot_every = read_int(n, k); });
    s.with("snapshot_views", [&](auto& n, auto k) { g.snapshot_views = read_int(n, k); });
    s.with("bake_resolution", [&](auto& n, auto k) { g.bake_resolution = read_int(n, k); });
    s.with("eval_views", [&](auto& n, auto k) { g.eval_views = read_int(n, k); });
    s.with("wall_clock", [&](auto& n, auto k) { g.wall_clock = read_bool(n, k); });
    s.finish();
  }
  {
    Section s(top.take("ablate"), "ablate");
    auto& a = c.ablate;
    s.with("axis", [&](auto& n, auto k) { a.axis = read_string(n, k); });
    s.with("values", [&](auto& n, auto k) {
      if (!n.IsSequence()) throw ConfigError(k, "expected a list");
      for (const auto& v : n) a.values.push_back(flow_text(v));
    });
    s.with("variance_trials", [&](auto& n, auto k) { a.variance_trials = read_int(n, k); });
    s.with("coverage_resolution",
           [&](auto& n, auto k) { a.coverage_resolution = read_int(n, k); });
    s.with("coverage_views", [&](auto& n, auto k) { a.coverage_views = read_int(n, k); });
    s.with("negative_condition",
           [&](auto& n, auto k) { a.negative_condition = read_string(n, k); });
    s.finish();
  }
  {
    Section s(top.take("gradcheck"), "gradcheck");
    auto& g = c.gradcheck;
    s.with("trials", [&](auto& n, auto k) { g.trials = read_int(n, k); });
    s.with("params_per_trial", [&](auto& n, auto k) { g.params_per_trial = read_int(n, k); });
    s.with("stencil", [&](auto& n, auto k) { g.stencil = read_int(n, k); });
    s.with("step", [&](auto& n, auto k) { g.step = read_double(n, k); });
    s.with("tolerance", [&](auto& n, auto k) { g.tolerance = read_double(n, k); });
    s.with("resolution", [&](auto& n, auto k) { g.resolution = read_int(n, k); });
    s.with("inject_sign_flip", [&](auto& n, auto k) { g.inject_sign_flip = read_bool(n, k); });
    s.finish();
  }
  {
    Section s(top.take("views"), "views");
    auto& v = c.views;
    s.with("count", [&](auto& n, auto k) { v.count = read_int(n, k); });
    s.with("elevation", [&](auto& n, auto k) { v.elevation = read_double(n, k); });
    s.with("distance", [&](auto& n, auto k) { v.distance = read_double(n, k); });
    s.with("resolution", [&](auto& n, auto k) { v.resolution = read_int(n, k); });
    s.with("constant_color", [&](auto& n, auto k) { v.constant_color = read_vec3(n, k); });
    s.with("checkpoint", [&](auto& n, auto k) {
      v.checkpoint = resolve_path(base_dir, read_string(n, k));
    });
    s.finish();
    if (v.count < 0) throw ConfigError("views.count", "must be >= 0");
  }
  {
    Section s(top.take("bake"), "bake");
    s.with("checkpoint", [&](auto& n, auto k) {
      c.bake.checkpoint = resolve_path(base_dir, read_string(n, k));
    });
    s.with("resolution", [&](auto& n, auto k) { c.bake.resolution = read_int(n, k); });
    s.finish();
  }
  top.finish();

  c.sds.validate();
  if (c.oracle.conditions.empty()) return c;
  if (!c.oracle.conditions.count(c.sds.condition))
    throw ConfigError("sds.condition",
                      "condition '" + c.sds.condition + "' is not defined under oracle.conditions");
  if (c.sds.negative_condition && !c.oracle.conditions.count(*c.sds.negative_condition))
    throw ConfigError("sds.negative_condition", "condition '" + *c.sds.negative_condition +
                                                    "' is not defined under oracle.conditions");
  return c;
}

RunConfig load_run_config(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("", fmt::format("cannot read config '{}'", file.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), fs::absolute(file).parent_path());
}

std::string dump_run_config(const RunConfig& c) {
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "tool_version" << YAML::Value << kToolVersion;
  e << YAML::Key << "mesh" << YAML::Value << c.mesh.string();
  e << YAML::Key << "output" << YAML::Value << c.output_dir.string();
  e << YAML::Key << "seed" << YAML::Value << c.sds.seed;
  e << YAML::Key << "threads" << YAML::Value << c.sds.threads;

  const auto& d = c.sds;
  e << YAML::Key << "sds" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "batch_size" << YAML::Value << d.batch_size;
  e << YAML::Key << "elevation_range" << YAML::Value;
  emit_range(e, d.elevation);
  e << YAML::Key << "azimuth_range" << YAML::Value;
  emit_range(e, d.azimuth);
  e << YAML::Key << "camera_distance_range" << YAML::Value;
  emit_range(e, d.distance);
  e << YAML::Key << "t_frac_range" << YAML::Value;
  emit_range(e, d.t_frac);
  e << YAML::Key << "guidance_scale" << YAML::Value << num(d.guidance_scale);
  e << YAML::Key << "steps" << YAML::Value << d.steps;
  e << YAML::Key << "lr" << YAML::Value << num(d.adam.lr);
  e << YAML::Key << "adam_betas" << YAML::Value << YAML::Flow << YAML::BeginSeq
    << num(d.adam.beta1) << num(d.adam.beta2) << YAML::EndSeq;
  e << YAML::Key << "adam_eps" << YAML::Value << num(d.adam.eps);
  e << YAML::Key << "clip_max_norm" << YAML::Value << num(d.clip_max_norm);
  e << YAML::Key << "depth_conditioning" << YAML::Value << d.depth_conditioning;
  e << YAML::Key << "condition" << YAML::Value << d.condition;
  if (d.negative_condition)
    e << YAML::Key << "negative_condition" << YAML::Value << *d.negative_condition;
  e << YAML::EndMap;

  e << YAML::Key << "render" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "resolution" << YAML::Value << d.resolution;
  e << YAML::Key << "fov" << YAML::Value << num(d.fov);
  e << YAML::Key << "background" << YAML::Value << num(d.background);
  e << YAML::EndMap;

  const auto& g = c.grid;
  e << YAML::Key << "hash_grid" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "levels" << YAML::Value << g.levels;
  e << YAML::Key << "base_resolution" << YAML::Value << g.base_resolution;
  e << YAML::Key << "growth_factor" << YAML::Value << num(g.growth_factor);
  e << YAML::Key << "features_per_level" << YAML::Value << g.features_per_level;
  e << YAML::Key << "table_size_log2" << YAML::Value << g.table_size_log2;
  e << YAML::EndMap;

  e << YAML::Key << "schedule" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "steps" << YAML::Value << c.schedule.steps;
  e << YAML::Key << "beta_start" << YAML::Value << num(c.schedule.beta_start);
  e << YAML::Key << "beta_end" << YAML::Value << num(c.schedule.beta_end);
  e << YAML::Key << "weighting" << YAML::Value << c.schedule.weighting;
  e << YAML::EndMap;

  const auto& o = c.oracle;
  e << YAML::Key << "oracle" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kind" << YAML::Value << o.kind;
  if (o.kind == "depth_routed")
    e << YAML::Key << "fallback_without_depth" << YAML::Value << o.fallback_without_depth;
  e << YAML::Key << "conditions" << YAML::Value << YAML::BeginMap;
  for (const auto& [id, cond] : o.conditions) {
    e << YAML::Key << id << YAML::Value << YAML::BeginMap;
    if (o.kind == "delta") {
      e << YAML::Key << "target" << YAML::Value;
      emit_target(e, cond.target);
    } else if (o.kind == "mixture") {
      e << YAML::Key << "modes" << YAML::Value << YAML::BeginSeq;
      for (const auto& m : cond.modes) {
        e << YAML::BeginMap << YAML::Key << "weight" << YAML::Value << num(m.weight);
        e << YAML::Key << "target" << YAML::Value;
        emit_target(e, m.target);
        e << YAML::EndMap;
      }
      e << YAML::EndSeq;
    } else {
      e << YAML::Key << "near" << YAML::Value;
      emit_target(e, cond.near_target);
      e << YAML::Key << "far" << YAML::Value;
      emit_target(e, cond.far_target);
      e << YAML::Key << "threshold" << YAML::Value << num(cond.threshold);
      e << YAML::Key << "invert" << YAML::Value << cond.invert;
    }
    e << YAML::EndMap;
  }
  e << YAML::EndMap << YAML::EndMap;

  const auto& gen = c.generate;
  e << YAML::Key << "generate" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "snapshot_every" << YAML::Value << gen.snapshot_every;
  e << YAML::Key << "snapshot_views" << YAML::Value << gen.snapshot_views;
  e << YAML::Key << "bake_resolution" << YAML::Value << gen.bake_resolution;
  e << YAML::Key << "eval_views" << YAML::Value << gen.eval_views;
  e << YAML::Key << "wall_clock" << YAML::Value << gen.wall_clock;
  e << YAML::EndMap;

  const auto& a = c.ablate;
  e << YAML::Key << "ablate" << YAML::Value << YAML::BeginMap;
  if (!a.axis.empty()) e << YAML::Key << "axis" << YAML::Value << a.axis;
  e << YAML::Key << "values" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto& v : a.values) e << YAML::Load(v);
  e << YAML::EndSeq;
  e << YAML::Key << "variance_trials" << YAML::Value << a.variance_trials;
  e << YAML::Key << "coverage_resolution" << YAML::Value << a.coverage_resolution;
  e << YAML::Key << "coverage_views" << YAML::Value << a.coverage_views;
  e << YAML::Key << "negative_condition" << YAML::Value << a.negative_condition;
  e << YAML::EndMap;

  const auto& gc = c.gradcheck;
  e << YAML::Key << "gradcheck" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "trials" << YAML::Value << gc.trials;
  e << YAML::Key << "params_per_trial" << YAML::Value << gc.params_per_trial;
  e << YAML::Key << "stencil" << YAML::Value << gc.stencil;
  e << YAML::Key << "step" << YAML::Value << num(gc.step);
  e << YAML::Key << "tolerance" << YAML::Value << num(gc.tolerance);
  e << YAML::Key << "resolution" << YAML::Value << gc.resolution;
  e << YAML::Key << "inject_sign_flip" << YAML::Value << gc.inject_sign_flip;
  e << YAML::EndMap;

  const auto& v = c.views;
  e << YAML::Key << "views" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "count" << YAML::Value << v.count;
  e << YAML::Key << "elevation" << YAML::Value << num(v.elevation);
  e << YAML::Key << "distance" << YAML::Value << num(v.distance);
  e << YAML::Key << "resolution" << YAML::Value << v.resolution;
  if (v.constant_color) {
    e << YAML::Key << "constant_color" << YAML::Value;
    emit_vec3(e, *v.constant_color);
  }
  if (!v.checkpoint.empty()) e << YAML::Key << "checkpoint" << YAML::Value << v.checkpoint.string();
  e << YAML::EndMap;

  e << YAML::Key << "bake" << YAML::Value << YAML::BeginMap;
  if (!c.bake.checkpoint.empty())
    e << YAML::Key << "checkpoint" << YAML::Value << c.bake.checkpoint.string();
  e << YAML::Key << "resolution" << YAML::Value << c.bake.resolution;
  e << YAML::EndMap;

  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

NoiseSchedule build_schedule(const ScheduleSpec& spec) {
  NoiseSchedule s = make_schedule(spec.steps, spec.beta_start, spec.beta_end);
  if (spec.weighting == "unit") std::fill(s.weights.begin(), s.weights.end(), 1.0);
  return s;
}

TargetPtr build_target(const TargetSpec& t) {
  if (t.kind == "solid") return std::make_shared<SolidTarget>(t.colors.at(0));
  if (t.kind == "checkerboard")
    return std::make_shared<CheckerboardTarget>(t.colors.at(0), t.colors.at(1), t.cells);
  if (t.kind == "gradient")
    return std::make_shared<GradientTarget>(t.colors.at(0), t.colors.at(1), t.axis);
  if (t.kind == "image") return std::make_shared<AtlasTarget>(read_png(t.path));
  throw ConfigError("", "unknown target kind '" + t.kind + "'");
}

std::unique_ptr<GuidanceModel> build_guidance(const RunConfig& config,
                                              const NoiseSchedule& schedule) {
  const auto& o = config.oracle;
  if (o.conditions.empty()) throw ConfigError("oracle", "no oracle section");
  if (o.kind == "delta") {
    std::map<std::string, TargetPtr> targets;
    for (const auto& [id, c] : o.conditions) targets[id] = build_target(c.target);
    return std::make_unique<DeltaOracle>(schedule, std::move(targets));
  }
  if (o.kind == "mixture") {
    std::map<std::string, std::vector<MixtureMode>> modes;
    for (const auto& [id, c] : o.conditions)
      for (const auto& m : c.modes) modes[id].push_back({m.weight, build_target(m.target)});
    return std::make_unique<MixtureOracle>(schedule, std::move(modes));
  }
  std::map<std::string, DepthRouting> routes;
  for (const auto& [id, c] : o.conditions)
    routes[id] = DepthRouting{build_target(c.near_target), build_target(c.far_target),
                              c.threshold, c.invert, o.fallback_without_depth};
  return std::make_unique<DepthRoutedOracle>(schedule, std::move(routes));
}

TriangleMesh load_run_mesh(const RunConfig& config) {
  if (config.mesh.empty()) throw ConfigError("mesh", "no mesh path given");
  if (!fs::exists(config.mesh))
    throw ConfigError("mesh", fmt::format("file '{}' does not exist", config.mesh.string()));
  return normalize_mesh(load_obj(config.mesh)).mesh;
}

const std::vector<std::string>& ablation_axes() {
  static const std::vector<std::string> axes{
      "batch_size", "elevation_range", "camera_distance_range", "t_frac_range",
      "guidance_scale", "lr", "negative_prompt", "clip_max_norm"};
  return axes;
}

void apply_ablation(RunConfig& config, const std::string& axis, const std::string& value) {
  const auto& axes = ablation_axes();
  if (std::find(axes.begin(), axes.end(), axis) == axes.end()) {
    std::string list;
    for (const auto& a : axes) list += (list.empty() ? "" : ", ") + a;
    throw ConfigError("ablate.axis", "unknown axis '" + axis + "'; valid axes: " + list);
  }
  const std::string key = "ablate.values";
  YAML::Node n;
  try {
    n = YAML::Load(value);
  } catch (const YAML::Exception&) {
    throw ConfigError(key, "cannot parse value '" + value + "'");
  }
  auto& d = config.sds;
  if (axis == "batch_size") d.batch_size = read_int(n, key);
  else if (axis == "elevation_range") d.elevation = read_range(n, key);
  else if (axis == "camera_distance_range") d.distance = read_range(n, key);
  else if (axis == "t_frac_range") d.t_frac = read_range(n, key);
  else if (axis == "guidance_scale") d.guidance_scale = read_double(n, key);
  else if (axis == "lr") d.adam.lr = read_double(n, key);
  else if (axis == "clip_max_norm") d.clip_max_norm = read_double(n, key);
  else if (axis == "negative_prompt") {
    if (read_bool(n, key)) {
      if (!config.oracle.conditions.count(config.ablate.negative_condition))
        throw ConfigError("ablate.negative_condition",
                          "condition '" + config.ablate.negative_condition + "' is not defined");
      d.negative_condition = config.ablate.negative_condition;
    } else {
      d.negative_condition.reset();
    }
  }
  d.validate();
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace sdstex
