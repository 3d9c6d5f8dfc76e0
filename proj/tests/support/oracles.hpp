#pragma once

// Reference implementations used by unit and acceptance tests. They are
// deliberately naive and share no code paths with the library beyond the
// public data layout.

#include "sdstex/image.hpp"
#include "sdstex/mesh.hpp"
#include "sdstex/renderer.hpp"
#include "sdstex/texture_field.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace oracle {

using sdstex::Vec3;

// Hash-grid evaluation straight from the definition: per level scale to the
// lattice, fetch 8 corners, trilinear blend, concatenate, decode, sigmoid.
inline Vec3 brute_force_color(const sdstex::TextureField& field, const Vec3& p) {
  const auto& cfg = field.config();
  const auto params = field.parameters();
  const long double T = std::ldexp(1.0L, cfg.table_size_log2);
  const int L = cfg.levels, F = cfg.features_per_level;
  std::vector<double> feats(static_cast<std::size_t>(L * F), 0.0);
  for (int l = 0; l < L; ++l) {
    const int res = static_cast<int>(std::floor(cfg.base_resolution * std::pow(cfg.growth_factor, l)));
    const unsigned long long side = static_cast<unsigned long long>(res) + 1;
    const bool dense = static_cast<long double>(side * side * side) <= T;
    double pos[3];
    int cell[3];
    for (int a = 0; a < 3; ++a) {
      pos[a] = (p[a] + 1.0) / 2.0 * res;
      cell[a] = static_cast<int>(std::floor(pos[a]));
      if (cell[a] >= res) cell[a] = res - 1;
      if (cell[a] < 0) cell[a] = 0;
    }
    for (int corner = 0; corner < 8; ++corner) {
      unsigned long long c[3];
      double w = 1.0;
      for (int a = 0; a < 3; ++a) {
        const int bit = (corner >> a) & 1;
        c[a] = static_cast<unsigned long long>(cell[a] + bit);
        const double frac = pos[a] - cell[a];
        w *= bit ? frac : 1.0 - frac;
      }
      unsigned long long row;
      if (dense) {
        row = c[0] + side * c[1] + side * side * c[2];
      } else {
        row = (c[0] * 1ULL) ^ (c[1] * 2654435761ULL) ^ (c[2] * 805459861ULL);
        row %= static_cast<unsigned long long>(T);
      }
      const std::size_t base =
          (static_cast<std::size_t>(l) * static_cast<std::size_t>(T) + row) * F;
      for (int f = 0; f < F; ++f) feats[l * F + f] += w * params[base + f];
    }
  }
  const std::size_t wbase = static_cast<std::size_t>(L) * static_cast<std::size_t>(T) * F;
  Vec3 out;
  for (int ch = 0; ch < 3; ++ch) {
    double z = params[wbase + 3 * L * F + ch];
    for (int k = 0; k < L * F; ++k) z += params[wbase + ch * L * F + k] * feats[k];
    out[ch] = 1.0 / (1.0 + std::exp(-z));
  }
  return out;
}

struct RayHit {
  int triangle = -1;
  double depth = std::numeric_limits<double>::infinity();
  // Depth of the nearest hit on any other triangle (for tie detection).
  double runner_up = std::numeric_limits<double>::infinity();
};

// Moller-Trumbore intersection; returns the ray parameter or -1.
inline double intersect(const Vec3& o, const Vec3& d, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 pv = d.cross(e2);
  const double det = e1.dot(pv);
  if (det == 0.0) return -1.0;
  const Vec3 tv = o - a;
  const double u = tv.dot(pv) / det;
  if (u < 0.0 || u > 1.0) return -1.0;
  const Vec3 qv = tv.cross(e1);
  const double v = d.dot(qv) / det;
  if (v < 0.0 || u + v > 1.0) return -1.0;
  return e2.dot(qv) / det;
}

// One ray per pixel centre through every triangle. The ray direction has
// unit component along the camera forward axis, so the ray parameter is the
// eye-space depth.
inline std::vector<RayHit> ray_cast(const sdstex::TriangleMesh& mesh, const sdstex::Camera& cam,
                                    double near_plane) {
  const int R = cam.resolution;
  const double t = std::tan(cam.vertical_fov * 3.14159265358979323846 / 360.0);
  std::vector<RayHit> hits(static_cast<std::size_t>(R) * R);
  for (int y = 0; y < R; ++y)
    for (int x = 0; x < R; ++x) {
      const double sx = (2.0 * (x + 0.5) / R - 1.0) * t;
      const double sy = (1.0 - 2.0 * (y + 0.5) / R) * t;
      const Vec3 dir = cam.forward + sx * cam.right + sy * cam.up;
      RayHit& h = hits[static_cast<std::size_t>(y) * R + x];
      for (std::size_t k = 0; k < mesh.triangles.size(); ++k) {
        const auto& tri = mesh.triangles[k];
        const double s = intersect(cam.eye, dir, mesh.positions[tri[0]], mesh.positions[tri[1]],
                                   mesh.positions[tri[2]]);
        if (s < near_plane) continue;
        if (s < h.depth) {
          h.runner_up = h.depth;
          h.depth = s;
          h.triangle = static_cast<int>(k);
        } else if (s < h.runner_up) {
          h.runner_up = s;
        }
      }
    }
  return hits;
}

// log N(x; mean, var I) summed over all entries, without the constant.
inline long double gaussian_log(const std::vector<double>& x, const std::vector<double>& mean,
                                double scale, double var) {
  long double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double d = static_cast<long double>(x[i]) - scale * static_cast<long double>(mean[i]);
    s += d * d;
  }
  return -s / (2.0L * var);
}

// log of a point-mass mixture noised to level abar, via log-sum-exp.
inline long double mixture_log_density(const std::vector<double>& x,
                                       const std::vector<std::vector<double>>& modes,
                                       const std::vector<double>& weights, double abar) {
  std::vector<long double> terms;
  long double top = -std::numeric_limits<long double>::infinity();
  for (std::size_t m = 0; m < modes.size(); ++m) {
    if (weights[m] <= 0) continue;
    const long double v = std::log(static_cast<long double>(weights[m])) +
                          gaussian_log(x, modes[m], std::sqrt(abar), 1.0 - abar);
    terms.push_back(v);
    top = std::max(top, v);
  }
  long double s = 0;
  for (long double v : terms) s += std::exp(v - top);
  return top + std::log(s);
}

// -sqrt(1 - abar) * grad log p_t(x) by central differences.
inline std::vector<double> score_noise_fd(const std::vector<double>& x,
                                          const std::vector<std::vector<double>>& modes,
                                          const std::vector<double>& weights, double abar,
                                          double h) {
  std::vector<double> out(x.size());
  std::vector<double> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const long double up = mixture_log_density(probe, modes, weights, abar);
    probe[i] = x[i] - h;
    const long double down = mixture_log_density(probe, modes, weights, abar);
    probe[i] = x[i];
    out[i] = static_cast<double>(-std::sqrt(1.0L - abar) * (up - down) / (2.0L * h));
  }
  return out;
}

// max_i |a_i - b_i| / max_i |b_i|
inline double max_relative(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return den == 0 ? num : num / den;
}

}  // namespace oracle
