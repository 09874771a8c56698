#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

namespace testing {

// Brute-force oracle: zooming 2-D grid over two log-space parameters,
// minimizing the squared relative constraint residuals.
using Occupancy = std::function<double(double p1, double p2, double level)>;

inline std::pair<double, double> grid_oracle(const std::vector<double>& levels, double N, double E,
                                             const Occupancy& occ, double u_lo, double u_hi, double v_lo,
                                             double v_hi) {
  auto cost = [&](double u, double v) {
    const double p1 = std::exp(u), p2 = std::exp(v);
    double n = 0.0, e = 0.0;
    for (double L : levels) {
      const double o = occ(p1, p2, L);
      n += o;
      e += o * L;
    }
    if (!std::isfinite(n) || n <= 0.0) return std::numeric_limits<double>::infinity();
    return (n / N - 1) * (n / N - 1) + (e / E - 1) * (e / E - 1);
  };
  constexpr int kSteps = 60;
  const double u_min = u_lo, u_max = u_hi, v_min = v_lo, v_max = v_hi;
  double bu = 0.5 * (u_lo + u_hi), bv = 0.5 * (v_lo + v_hi);
  for (int round = 0; round < 90; ++round) {
    const double du = (u_hi - u_lo) / kSteps, dv = (v_hi - v_lo) / kSteps;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kSteps; ++i) {
      for (int j = 0; j <= kSteps; ++j) {
        const double u = u_lo + i * du, v = v_lo + j * dv;
        const double c = cost(u, v);
        if (c < best) {
          best = c;
          bu = u;
          bv = v;
        }
      }
    }
    // halve the box around the incumbent so it can still slide along a valley
    u_lo = std::max(u_min, bu - kSteps / 4 * du);
    u_hi = std::min(u_max, bu + kSteps / 4 * du);
    v_lo = std::max(v_min, bv - kSteps / 4 * dv);
    v_hi = std::min(v_max, bv + kSteps / 4 * dv);
  }
  return {std::exp(bu), std::exp(bv)};
}

// Profile oracle for the random instances: a zooming 1-D log grid over the
// scale parameter, with the prefactor fixed by the count constraint (bisection
// for BE, closed form for MB). Returns {prefactor, scale}.
inline std::pair<double, double> profile_oracle(const std::vector<double>& levels, double N, double E, bool bose) {
  auto prefactor = [&](double scale) {
    if (!bose) {
      double z = 0.0;
      for (double L : levels) z += std::exp(-L / scale);
      return z / N;
    }
    double lo = -40.0, hi = 10.0;  // ln alpha; the count sum falls as alpha grows
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      double n = 0.0;
      for (double L : levels) n += 1.0 / std::expm1(std::exp(mid) + L / scale);
      (n > N ? lo : hi) = mid;
    }
    return std::exp(0.5 * (lo + hi));
  };
  auto energy_gap = [&](double v) {
    const double scale = std::exp(v), p = prefactor(scale);
    double e = 0.0;
    for (double L : levels) e += L * (bose ? 1.0 / std::expm1(p + L / scale) : std::exp(-L / scale) / p);
    return std::abs(e / E - 1.0);
  };
  constexpr int kSteps = 400;
  double lo = std::log(1e-3), hi = std::log(1e3), best_v = 0.0;
  for (int round = 0; round < 40; ++round) {
    const double dv = (hi - lo) / kSteps;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kSteps; ++i) {
      const double g = energy_gap(lo + i * dv);
      if (g < best) {
        best = g;
        best_v = lo + i * dv;
      }
    }
    lo = best_v - 2 * dv;
    hi = best_v + 2 * dv;
  }
  const double scale = std::exp(best_v);
  const double p = prefactor(scale);
  return {bose ? std::exp(p) : p, scale};
}

inline double be_occ(double alpha, double B, double L) { return 1.0 / std::expm1(alpha + L / B); }
inline double mb_occ(double C, double D, double L) { return std::exp(-L / D) / C; }

}  // namespace testing
