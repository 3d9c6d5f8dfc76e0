#include "sdstex/gradcheck.hpp"

#include "sdstex/random.hpp"
#include "sdstex/renderer.hpp"

#include <algorithm>
#include <cmath>

namespace sdstex {
namespace {

// init_random tables are ~1e-2; widen them so the sigmoid is exercised
// away from its linear region.
TextureField random_field(const HashGridConfig& grid, std::uint64_t seed) {
  TextureField f = init_random(grid, seed);
  auto p = f.parameters();
  const std::size_t tables = f.weight_offset(0, 0);
  for (std::size_t i = 0; i < tables; ++i) p[i] *= 50.0;
  Rng rng(mix_seed({seed, 0xb1a5}));
  for (int c = 0; c < 3; ++c) p[f.bias_offset(c)] = rng.uniform(-0.5, 0.5);
  return f;
}

std::vector<std::size_t> pick(std::vector<std::size_t> pool, int count, Rng& rng) {
  const auto n = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < n; ++i) {
    auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                      static_cast<std::int64_t>(pool.size()) - 1));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n);
  return pool;
}

// Central-difference derivative of f at 0.
template <class F>
double central_difference(F&& f, double h, int stencil) {
  switch (stencil) {
    case 2:
      return (f(h) - f(-h)) / (2.0 * h);
    case 4:
      return (-f(2 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2 * h)) / (12.0 * h);
    case 6:
      return (f(3 * h) - 9.0 * f(2 * h) + 45.0 * f(h) - 45.0 * f(-h) + 9.0 * f(-2 * h) -
              f(-3 * h)) /
             (60.0 * h);
  }
  throw Error("gradcheck: stencil must be 2, 4 or 6");
}

void record(SuiteReport& s, double analytic, double numeric, const GradcheckOptions& o) {
  const double a = o.inject_sign_flip ? -analytic : analytic;
  s.max_relative_error = std::max(s.max_relative_error, relative_error(a, numeric));
  ++s.checked;
}

SuiteReport eval_color_suite(const HashGridConfig& grid, const GradcheckOptions& o) {
  SuiteReport s{"eval_color"};
  for (int trial = 0; trial < o.trials; ++trial) {
    const auto seed = mix_seed({o.seed, 1, static_cast<std::uint64_t>(trial)});
    TextureField field = random_field(grid, seed);
    Rng rng(mix_seed({seed, 2}));
    const Vec3 p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Vec3 up(rng.normal(), rng.normal(), rng.normal());
    const SparseGradient g = eval_color_backward(field, p, up);
    std::vector<std::size_t> pool;
    for (const auto& [i, v] : g) pool.push_back(i);
    for (std::size_t k : pick(pool, o.params_per_trial, rng)) {
      const double analytic =
          std::lower_bound(g.begin(), g.end(), std::pair{k, -HUGE_VAL})->second;
      auto params = field.parameters();
      const double orig = params[k];
      const Vec3 base = eval_color(field, p);
      auto loss = [&](double d) {
        params[k] = orig + d;
        const double v = up.dot(eval_color(field, p) - base);
        params[k] = orig;
        return v;
      };
      record(s, analytic, central_difference(loss, o.step, o.stencil), o);
    }
  }
  return s;
}

SuiteReport shade_suite(const TriangleMesh& mesh, const HashGridConfig& grid,
                        const GradcheckOptions& o) {
  SuiteReport s{"shade"};
  for (int trial = 0; trial < o.trials; ++trial) {
    const auto seed = mix_seed({o.seed, 3, static_cast<std::uint64_t>(trial)});
    TextureField field = random_field(grid, seed);
    Rng rng(mix_seed({seed, 4}));
    const Camera cam = camera_from_spherical(rng.uniform(-60, 60), rng.uniform(0, 360),
                                             rng.uniform(1.6, 2.4), 45.0, o.resolution);
    const GBuffer gb = rasterize(mesh, cam);
    Image up(o.resolution, o.resolution, 3);
    for (double& v : up.data) v = rng.normal();
    const std::vector<double> g = shade_backward(gb, field, up);
    const Image base = shade(gb, field);
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g[i] != 0.0) pool.push_back(i);
    for (std::size_t k : pick(pool, o.params_per_trial, rng)) {
      auto params = field.parameters();
      const double orig = params[k];
      // Summing per-pixel differences from the unperturbed render keeps
      // untouched pixels exactly zero.
      auto loss = [&](double d) {
        params[k] = orig + d;
        const Image img = shade(gb, field);
        params[k] = orig;
        double v = 0.0;
        for (std::size_t i = 0; i < up.data.size(); ++i) v += up.data[i] * (img.data[i] - base.data[i]);
        return v;
      };
      record(s, g[k], central_difference(loss, o.step, o.stencil), o);
    }
  }
  return s;
}

}  // namespace

bool GradcheckReport::passed() const {
  return std::all_of(suites.begin(), suites.end(), [](const SuiteReport& s) { return s.passed; });
}

double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale == 0.0) return 0.0;
  return std::abs(analytic - numeric) / scale;
}

GradcheckReport run_gradcheck(const TriangleMesh& mesh, const HashGridConfig& grid,
                              const GradcheckOptions& options) {
  GradcheckReport report;
  report.suites.push_back(eval_color_suite(grid, options));
  report.suites.push_back(shade_suite(mesh, grid, options));
  for (auto& s : report.suites)
    s.passed = s.checked > 0 && s.max_relative_error < options.tolerance;
  return report;
}

}  // namespace sdstex
