#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <tuple>
#include <utility>

namespace cogstat::roots {

struct Bracket {
  double lo;
  double hi;
};

/// Widens [lo, hi] by `step` on the side that has to move until the
/// increasing function f changes sign over it, spending at most `max_steps`
/// widenings. Callers work in log space, so this is geometric expansion of
/// the underlying parameter. Returns nullopt when no sign change was found.
template <class F>
std::optional<Bracket> expand_bracket(F&& f, double lo, double hi, double step, int max_steps) {
  double flo = f(lo);
  double fhi = f(hi);
  for (int k = 0;; ++k) {
    if (std::isnan(flo) || std::isnan(fhi)) return std::nullopt;
    if (flo <= 0.0 && fhi >= 0.0) return Bracket{lo, hi};
    if (k == max_steps) return std::nullopt;
    if (flo > 0.0) flo = f(lo -= step);
    if (fhi < 0.0) fhi = f(hi += step);
  }
}

struct RootResult {
  double x;
  double fx;
  int iterations;
  bool converged;
};

/// Safeguarded Newton on a bracketing interval: a Newton step is taken when
/// it stays inside the current bracket and shrinks |f| fast enough, otherwise
/// the interval is bisected. `fdf(x)` returns {f(x), f'(x)}. Stops when
/// `done(x, fx)` is true or the bracket width falls below `xtol`.
template <class FdF, class Done>
RootResult newton_bisect(FdF&& fdf, Bracket b, Done&& done, double xtol, int max_iter) {
  auto [flo, dlo] = fdf(b.lo);
  (void)dlo;
  double lo = b.lo;
  double hi = b.hi;
  if (flo > 0.0) std::swap(lo, hi);  // keep f(lo) <= 0 <= f(hi)

  double x = 0.5 * (b.lo + b.hi);
  double dx_old = std::abs(b.hi - b.lo);
  double dx = dx_old;
  auto [fx, dfx] = fdf(x);
  RootResult best{x, fx, 0, false};

  for (int it = 1; it <= max_iter; ++it) {
    if (std::abs(fx) < std::abs(best.fx)) best = {x, fx, it, false};
    if (done(x, fx)) return {x, fx, it, true};
    if (fx < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    if (std::abs(hi - lo) <= xtol) {
      best.iterations = it;
      best.converged = done(best.x, best.fx);
      return best;
    }

    const double newton = (dfx != 0.0 && std::isfinite(dfx)) ? x - fx / dfx : std::numeric_limits<double>::quiet_NaN();
    const double left = std::min(lo, hi);
    const double right = std::max(lo, hi);
    const bool inside = std::isfinite(newton) && newton > left && newton < right;
    if (inside && std::abs(2.0 * fx) <= std::abs(dx_old * dfx)) {
      dx_old = dx;
      dx = newton - x;
      x = newton;
    } else {
      dx_old = dx;
      dx = 0.5 * (right - left);
      x = left + dx;
    }
    std::tie(fx, dfx) = fdf(x);
  }
  if (std::abs(fx) < std::abs(best.fx)) best = {x, fx, max_iter, false};
  best.iterations = max_iter;
  best.converged = done(best.x, best.fx);
  return best;
}

}  // namespace cogstat::roots
