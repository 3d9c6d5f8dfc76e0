#pragma once

#include "sdstex/mesh.hpp"
#include "sdstex/texture_field.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sdstex {

struct GradcheckOptions {
  int trials = 50;
  int params_per_trial = 20;
  // Central-difference stencil order (2, 4 or 6) and base step. Low-order
  // stencils at small steps hit the roundoff floor on tiny gradients.
  int stencil = 6;
  double step = 0.03;
  double tolerance = 1e-5;
  int resolution = 32;
  std::uint64_t seed = 0;
  // Negates the analytic gradient; used to confirm the checker can fail.
  bool inject_sign_flip = false;
};

struct SuiteReport {
  std::string name;
  int checked = 0;
  double max_relative_error = 0.0;
  bool passed = true;
};

struct GradcheckReport {
  std::vector<SuiteReport> suites;
  bool passed() const;
};

// |a - n| / max(|a|, |n|), zero when both vanish.
double relative_error(double analytic, double numeric);

// Central differences of the order given in `options` against eval_color_backward (random points) and
// shade_backward (random cameras around `mesh`, random upstream images) on
// randomly initialised fields.
GradcheckReport run_gradcheck(const TriangleMesh& mesh, const HashGridConfig& grid,
                              const GradcheckOptions& options);

}  // namespace sdstex
