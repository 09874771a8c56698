#include "cogstat/distfit.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <sstream>

#include "cogstat/errors.hpp"
#include "cogstat/io.hpp"
#include "cogstat/roots.hpp"

namespace cogstat {

std::string to_string(Family f) { return f == Family::BE ? "BE" : "MB"; }

namespace {

constexpr double kScaleLow = 1e-6;   // B, D search box relative to E_max
constexpr double kScaleHigh = 1e6;
constexpr double kExpandFactor = 10.0;
constexpr int kExpandSteps = 12;
constexpr double kAlphaMin = 1e-12;  // A > 1 + 1e-12
constexpr double kAlphaMax = 27.631021115928547;  // ln(1e12)

void check_inputs(std::span<const double> levels, double N, double E) {
  if (levels.size() < 2) throw DegenerateSpectrum("fit needs at least two energy levels");
  if (!(E > 0.0)) throw DegenerateSpectrum("total energy is zero: every word sits in the ground level");
  if (!(N > 0.0) || !std::isfinite(N) || !std::isfinite(E)) {
    throw InputError("totals N and E must be positive and finite");
  }
  if (levels[0] != 0.0) throw InputError("ground level must be exactly 0");
  for (double l : levels) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw InputError("energy levels must be finite and non-negative");
  }
}

// Both families approach equal occupancy of every level as the scale grows,
// so the mean energy per word must stay below the ladder average.
void check_finite_scale(std::span<const double> levels, double N, double E, Family family) {
  const double ladder_mean = std::accumulate(levels.begin(), levels.end(), 0.0) / static_cast<double>(levels.size());
  if (E / N >= ladder_mean * (1.0 - 1e-12)) {
    throw NoConvergence(to_string(family) +
                            " fit: mean energy per word is not reachable for a finite scale (flat or inverted spectrum)",
                        0.0, (E / N - ladder_mean) / (E / N));
  }
}

// Bose occupancy 1/(e^x - 1) and the magnitude of its x-derivative,
// e^x/(e^x - 1)^2, written so neither overflows for large x.
inline double bose(double x) { return 1.0 / std::expm1(x); }
inline double bose_slope(double x) { return 1.0 / (std::expm1(x) * -std::expm1(-x)); }

struct BeSums {
  double n = 0.0;     // sum n_i
  double e = 0.0;     // sum L_i n_i
  double w = 0.0;     // sum w_i
  double wl = 0.0;    // sum w_i L_i
  double wll = 0.0;   // sum w_i L_i^2
};

BeSums be_sums(std::span<const double> levels, double alpha, double B) {
  BeSums s;
  for (double l : levels) {
    const double x = alpha + l / B;
    const double n = bose(x);
    const double w = bose_slope(x);
    s.n += n;
    s.e += l * n;
    s.w += w;
    s.wl += w * l;
    s.wll += w * l * l;
  }
  return s;
}

// Solves sum_i 1/(exp(alpha + L_i/B) - 1) = N for alpha > 0. The left side
// decreases strictly in alpha, so the solution is unique when bracketed.
std::optional<double> solve_alpha(std::span<const double> levels, double B, double N, double rel_tol) {
  auto fdf = [&](double t) {
    const double alpha = std::exp(t);
    const BeSums s = be_sums(levels, alpha, B);
    return std::pair{s.n - N, -alpha * s.w};
  };
  const double t_lo = std::log(kAlphaMin);
  const double t_hi = std::log(kAlphaMax);
  const double f_lo = fdf(t_lo).first;
  const double f_hi = fdf(t_hi).first;
  if (!(f_lo >= 0.0 && f_hi <= 0.0)) return std::nullopt;
  auto done = [&](double, double f) { return std::abs(f) <= rel_tol * N; };
  auto r = roots::newton_bisect(fdf, {t_lo, t_hi}, done, 1e-15, 400);
  return std::exp(r.x);
}

struct BeSolution {
  double alpha;
  double B;
  int iterations;
};

BeSolution solve_be_nested(std::span<const double> levels, double N, double E, const FitOptions& opts) {
  const double e_max = *std::max_element(levels.begin(), levels.end());
  const double inner_tol = std::min(opts.rel_tol * 1e-3, 1e-13);
  double last_alpha = std::numeric_limits<double>::quiet_NaN();
  double best_rn = std::numeric_limits<double>::infinity();
  double best_re = std::numeric_limits<double>::infinity();

  auto energy_gap = [&](double v) -> std::pair<double, double> {
    const double B = std::exp(v);
    const auto alpha = solve_alpha(levels, B, N, inner_tol);
    if (!alpha) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
    last_alpha = *alpha;
    const BeSums s = be_sums(levels, *alpha, B);
    best_rn = std::min(best_rn, std::abs(s.n - N) / N);
    best_re = std::min(best_re, std::abs(s.e - E) / E);
    // dE/dB at fixed N is the w-weighted variance of L over B^2.
    const double var = s.wll - s.wl * s.wl / s.w;
    return {s.e - E, var / B};
  };

  const auto bracket = roots::expand_bracket([&](double v) { return energy_gap(v).first; },
                                             std::log(kScaleLow * e_max), std::log(kScaleHigh * e_max),
                                             std::log(kExpandFactor), kExpandSteps);
  if (!bracket) {
    throw NoConvergence("BE fit: total energy cannot be matched for any B in the search box", best_rn,
                        best_re);
  }

  auto done = [&](double, double g) { return std::abs(g) <= opts.rel_tol * E; };
  const auto r = roots::newton_bisect(energy_gap, *bracket, done, 1e-15, opts.max_outer_iterations);
  if (!r.converged) {
    throw NoConvergence("BE fit: outer solve in B stalled", best_rn, best_re);
  }
  energy_gap(r.x);  // refresh last_alpha at the accepted point
  return {last_alpha, std::exp(r.x), r.iterations};
}

BeSolution solve_be_newton(std::span<const double> levels, double N, double E, const FitOptions& opts) {
  const double n_levels = static_cast<double>(levels.size());
  // Start from the classical regime: B at the mean energy per word and a
  // fugacity that spreads N words over the ladder.
  double t = std::log(std::log1p(n_levels / N) + 1e-3);
  double v = std::log(E / N);
  double best_rn = std::numeric_limits<double>::infinity();
  double best_re = std::numeric_limits<double>::infinity();

  auto residuals = [&](double tt, double vv) {
    const BeSums s = be_sums(levels, std::exp(tt), std::exp(vv));
    return std::pair{s.n / N - 1.0, s.e / E - 1.0};
  };
  auto merit = [](std::pair<double, double> f) { return 0.5 * (f.first * f.first + f.second * f.second); };

  for (int it = 1; it <= opts.max_outer_iterations; ++it) {
    const double alpha = std::exp(t);
    const double B = std::exp(v);
    const BeSums s = be_sums(levels, alpha, B);
    const double f1 = s.n / N - 1.0;
    const double f2 = s.e / E - 1.0;
    if (std::isfinite(f1) && std::isfinite(f2)) {
      best_rn = std::min(best_rn, std::abs(f1));
      best_re = std::min(best_re, std::abs(f2));
    }
    if (std::abs(f1) <= opts.rel_tol && std::abs(f2) <= opts.rel_tol) return {alpha, B, it};

    const double j11 = -alpha * s.w / N;
    const double j12 = s.wl / B / N;
    const double j21 = -alpha * s.wl / E;
    const double j22 = s.wll / B / E;
    const double det = j11 * j22 - j12 * j21;
    if (!std::isfinite(det) || det == 0.0) break;
    double dt = -(j22 * f1 - j12 * f2) / det;
    double dv = -(-j21 * f1 + j11 * f2) / det;
    const double len = std::max(std::abs(dt), std::abs(dv));
    if (len > 2.0) {
      dt *= 2.0 / len;
      dv *= 2.0 / len;
    }
    const double m0 = merit({f1, f2});
    double lambda = 1.0;
    bool accepted = false;
    for (int k = 0; k < 60; ++k, lambda *= 0.5) {
      const double tn = t + lambda * dt;
      const double vn = v + lambda * dv;
      if (std::exp(tn) < kAlphaMin || std::exp(tn) > kAlphaMax) continue;
      const auto fn = residuals(tn, vn);
      if (std::isfinite(fn.first) && std::isfinite(fn.second) && merit(fn) < (1.0 - 1e-4 * lambda) * m0) {
        t = tn;
        v = vn;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  throw NoConvergence("BE fit: damped Newton did not converge", best_rn, best_re);
}

DistributionFit finish_fit(Family family, double p1, double p2, std::vector<double> predicted,
                           std::span<const double> levels, double N, double E, int iterations,
                           const FitOptions& opts) {
  DistributionFit fit;
  fit.family = family;
  fit.p1 = p1;
  fit.p2 = p2;
  fit.iterations = iterations;
  fit.predicted_radiated.resize(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) fit.predicted_radiated[i] = predicted[i] * levels[i];
  fit.residual_N = std::accumulate(predicted.begin(), predicted.end(), 0.0) - N;
  fit.residual_E = std::accumulate(fit.predicted_radiated.begin(), fit.predicted_radiated.end(), 0.0) - E;
  fit.predicted_counts = std::move(predicted);
  // Summation order differs from the solver's, so allow a few ulps of slack.
  const double slack = std::max(opts.rel_tol, 1e-12);
  if (std::abs(fit.residual_N) > slack * N || std::abs(fit.residual_E) > slack * E) {
    throw NoConvergence(to_string(family) + " fit: constraint residuals above tolerance",
                        std::abs(fit.residual_N) / N, std::abs(fit.residual_E) / E);
  }
  return fit;
}

void score(DistributionFit& fit, const EnergyModel& model) {
  std::vector<double> data(model.counts().begin(), model.counts().end());
  std::tie(fit.rmse_counts, fit.rmse_log_counts) = goodness_of_fit(data, fit.predicted_counts);
}

}  // namespace

DistributionFit fit_be(std::span<const double> levels, double N, double E, const FitOptions& opts) {
  check_inputs(levels, N, E);
  check_finite_scale(levels, N, E, Family::BE);
  const BeSolution sol = opts.be_solver == BeSolver::DampedNewton ? solve_be_newton(levels, N, E, opts)
                                                                  : solve_be_nested(levels, N, E, opts);
  std::vector<double> predicted(levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i) predicted[i] = bose(sol.alpha + levels[i] / sol.B);
  return finish_fit(Family::BE, std::exp(sol.alpha), sol.B, std::move(predicted), levels, N, E,
                    sol.iterations, opts);
}

DistributionFit fit_mb(std::span<const double> levels, double N, double E, const FitOptions& opts) {
  check_inputs(levels, N, E);
  check_finite_scale(levels, N, E, Family::MB);
  const double e_max = *std::max_element(levels.begin(), levels.end());
  const double target = E / N;
  double best_re = std::numeric_limits<double>::infinity();

  // Mean energy of the Boltzmann weights exp(-L/D); it increases with D and
  // its log-derivative is the weighted variance over D.
  auto mean_gap = [&](double v) -> std::pair<double, double> {
    const double D = std::exp(v);
    double z = 0.0, zl = 0.0, zll = 0.0;
    for (double l : levels) {
      const double w = std::exp(-l / D);
      z += w;
      zl += w * l;
      zll += w * l * l;
    }
    const double mean = zl / z;
    best_re = std::min(best_re, std::abs(mean - target) / target);
    return {mean - target, (zll / z - mean * mean) / D};
  };

  const auto bracket = roots::expand_bracket([&](double v) { return mean_gap(v).first; },
                                             std::log(kScaleLow * e_max), std::log(kScaleHigh * e_max),
                                             std::log(kExpandFactor), kExpandSteps);
  // The mean only approaches the ladder average as D grows, so an exact hit
  // at the upper end means the target is the infinite-temperature limit.
  if (!bracket || !(mean_gap(bracket->hi).first > 0.0)) {
    throw NoConvergence(
        "MB fit: mean energy per word is not reachable for finite D (flat or inverted spectrum)", 0.0,
        best_re);
  }
  auto done = [&](double, double g) { return std::abs(g) <= opts.rel_tol * target; };
  const auto r = roots::newton_bisect(mean_gap, *bracket, done, 1e-15, opts.max_outer_iterations);
  if (!r.converged) throw NoConvergence("MB fit: solve in D stalled", 0.0, best_re);

  const double D = std::exp(r.x);
  std::vector<double> weights(levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i) weights[i] = std::exp(-levels[i] / D);
  const double z = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double C = z / N;
  for (auto& w : weights) w /= C;
  return finish_fit(Family::MB, C, D, std::move(weights), levels, N, E, r.iterations, opts);
}

DistributionFit fit_be(const EnergyModel& model, const FitOptions& opts) {
  auto fit = fit_be(model.levels(), static_cast<double>(model.total_words()), model.total_energy(), opts);
  score(fit, model);
  return fit;
}

DistributionFit fit_mb(const EnergyModel& model, const FitOptions& opts) {
  auto fit = fit_mb(model.levels(), static_cast<double>(model.total_words()), model.total_energy(), opts);
  score(fit, model);
  return fit;
}

std::pair<double, double> goodness_of_fit(std::span<const double> data_counts,
                                          std::span<const double> predicted_counts) {
  if (data_counts.size() != predicted_counts.size()) {
    throw LengthMismatch("goodness_of_fit: " + std::to_string(data_counts.size()) + " data vs " +
                         std::to_string(predicted_counts.size()) + " predicted values");
  }
  if (data_counts.empty()) throw InputError("goodness_of_fit: no values");
  double sq = 0.0;
  double sq_log = 0.0;
  std::size_t n_log = 0;
  for (std::size_t i = 0; i < data_counts.size(); ++i) {
    const double p = predicted_counts[i];
    if (!(p > 0.0)) throw NonPositiveInput("goodness_of_fit: predicted count must be positive");
    const double diff = data_counts[i] - p;
    sq += diff * diff;
    if (data_counts[i] > 0.0) {
      const double dl = std::log(data_counts[i]) - std::log(p);
      sq_log += dl * dl;
      ++n_log;
    }
  }
  const double rmse = std::sqrt(sq / static_cast<double>(data_counts.size()));
  const double rmse_log = n_log == 0 ? 0.0 : std::sqrt(sq_log / static_cast<double>(n_log));
  return {rmse, rmse_log};
}

namespace {

Family pick_winner(const DistributionFit& be, const std::optional<DistributionFit>& mb) {
  if (!mb) return Family::BE;
  if (mb->rmse_log_counts < be.rmse_log_counts) return Family::MB;
  if (mb->rmse_log_counts == be.rmse_log_counts && mb->rmse_counts < be.rmse_counts) return Family::MB;
  return Family::BE;
}

FitReport assemble(const EnergyModel& model, DistributionFit be, const FitOptions& opts) {
  FitReport report;
  report.d_used = model.d();
  report.be = std::move(be);
  try {
    report.mb = fit_mb(model, opts);
  } catch (const ConvergenceError&) {
    report.mb.reset();
  }
  report.winner = pick_winner(report.be, report.mb);
  return report;
}

}  // namespace

FitReport fit_report(const EnergyModel& model, const FitOptions& opts) {
  return assemble(model, fit_be(model, opts), opts);
}

FitReport search_d(const WordSpectrum& spectrum, std::span<const double> d_grid, const FitOptions& opts) {
  if (d_grid.empty()) throw InputError("d grid is empty");
  for (std::size_t k = 0; k < d_grid.size(); ++k) {
    if (!(d_grid[k] > 0.0) || !std::isfinite(d_grid[k])) {
      throw InvalidExponent("d grid values must be positive and finite");
    }
    if (k > 0 && d_grid[k] < d_grid[k - 1]) throw InputError("d grid must be sorted ascending");
  }
  if (spectrum.empty()) throw EmptyCorpus();

  struct Attempt {
    std::optional<DistributionFit> be;
    std::string error;
  };
  std::vector<std::future<Attempt>> jobs;
  jobs.reserve(d_grid.size());
  for (double d : d_grid) {
    jobs.push_back(std::async(std::launch::async, [&spectrum, d, &opts] {
      try {
        return Attempt{fit_be(build_energy_model(spectrum, d), opts), {}};
      } catch (const ConvergenceError& e) {
        return Attempt{std::nullopt, e.what()};
      }
    }));
  }

  std::vector<GridPoint> grid;
  std::vector<Attempt> attempts;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    attempts.push_back(jobs[k].get());
    const auto& a = attempts.back();
    grid.push_back({d_grid[k], a.be.has_value(), a.be ? a.be->rmse_log_counts : 0.0, a.error});
  }

  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!grid[k].converged) continue;
    if (!best) {
      best = k;
      continue;
    }
    const double a = grid[k].rmse_log_counts;
    const double b = grid[*best].rmse_log_counts;
    const double tie_band = 1e-12 * std::max(std::abs(a), std::abs(b));
    if (a < b - tie_band) {
      best = k;
    } else if (std::abs(a - b) <= tie_band) {
      const double dk = std::abs(grid[k].d - 1.0);
      const double db = std::abs(grid[*best].d - 1.0);
      if (dk < db || (dk == db && grid[k].d < grid[*best].d)) best = k;
    }
  }
  if (!best) throw AllFitsFailed("no exponent in the d grid produced a converged BE fit");

  const EnergyModel model = build_energy_model(spectrum, d_grid[*best]);
  FitReport report = assemble(model, std::move(*attempts[*best].be), opts);
  report.grid = std::move(grid);
  return report;
}

std::vector<double> make_d_grid(double min, double max, double step) {
  if (!(step > 0.0) || !(min > 0.0) || !(max >= min) || !std::isfinite(max)) {
    throw InputError("d grid needs 0 < MIN <= MAX and STEP > 0");
  }
  const auto count = static_cast<std::size_t>(std::floor((max - min) / step + 1e-9)) + 1;
  std::vector<double> grid;
  grid.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    grid.push_back(std::round((min + static_cast<double>(k) * step) * 1e12) / 1e12);
  }
  return grid;
}

std::vector<double> parse_d_grid(const std::string& spec) {
  const auto first = spec.find(':');
  const auto second = first == std::string::npos ? std::string::npos : spec.find(':', first + 1);
  if (second == std::string::npos) throw InputError("d grid must look like MIN:MAX:STEP, got '" + spec + "'");
  try {
    std::size_t used = 0;
    const std::string a = spec.substr(0, first);
    const std::string b = spec.substr(first + 1, second - first - 1);
    const std::string c = spec.substr(second + 1);
    const double lo = std::stod(a, &used);
    if (used != a.size()) throw std::invalid_argument(a);
    const double hi = std::stod(b, &used);
    if (used != b.size()) throw std::invalid_argument(b);
    const double st = std::stod(c, &used);
    if (used != c.size()) throw std::invalid_argument(c);
    return make_d_grid(lo, hi, st);
  } catch (const std::logic_error&) {
    throw InputError("d grid must look like MIN:MAX:STEP, got '" + spec + "'");
  }
}

nlohmann::json to_json(const DistributionFit& fit, bool with_curves) {
  const bool be = fit.family == Family::BE;
  nlohmann::json j{{"family", to_string(fit.family)},
                   {"p1", fit.p1},
                   {"p2", fit.p2},
                   {be ? "A" : "C", fit.p1},
                   {be ? "B" : "D", fit.p2},
                   {"residual_N", fit.residual_N},
                   {"residual_E", fit.residual_E},
                   {"rmse_counts", fit.rmse_counts},
                   {"rmse_log_counts", fit.rmse_log_counts},
                   {"iterations", fit.iterations}};
  if (with_curves) {
    j["predicted_counts"] = fit.predicted_counts;
    j["predicted_radiated"] = fit.predicted_radiated;
  }
  return j;
}

nlohmann::json to_json(const FitReport& report) {
  nlohmann::json j{{"d_used", report.d_used},
                   {"winner", to_string(report.winner)},
                   {"be", to_json(report.be)},
                   {"mb", report.mb ? to_json(*report.mb) : nlohmann::json(nullptr)}};
  if (!report.grid.empty()) {
    nlohmann::json grid = nlohmann::json::array();
    for (const auto& g : report.grid) {
      nlohmann::json p{{"d", g.d}, {"converged", g.converged}};
      if (g.converged) {
        p["rmse_log_counts"] = g.rmse_log_counts;
      } else {
        p["error"] = g.error;
      }
      grid.push_back(std::move(p));
    }
    j["grid"] = std::move(grid);
  }
  return j;
}

namespace {

std::string opt_cell(const std::optional<DistributionFit>& fit, bool radiated, std::size_t i) {
  if (!fit) return {};
  return io::format_sig6(radiated ? fit->predicted_radiated[i] : fit->predicted_counts[i]);
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

std::string fit_table_csv(const EnergyModel& model, const FitReport& report) {
  if (report.be.predicted_counts.size() != model.size()) {
    throw LengthMismatch("fit table: report and model have different level counts");
  }
  std::ostringstream out;
  out << "word,i,E_i,N_data,N_BE,N_MB,Erad_data,Erad_BE,Erad_MB\n";
  for (std::size_t k = 0; k < model.size(); ++k) {
    out << io::csv_escape(model.words().empty() ? std::string() : model.words()[k]) << ',' << (k + 1)
        << ',' << io::format_sig6(model.levels()[k]) << ',' << model.counts()[k] << ','
        << io::format_sig6(report.be.predicted_counts[k]) << ',' << opt_cell(report.mb, false, k) << ','
        << io::format_sig6(model.radiated()[k]) << ',' << io::format_sig6(report.be.predicted_radiated[k])
        << ',' << opt_cell(report.mb, true, k) << '\n';
  }
  out << "TOTAL,," << io::format_sig6(model.sum_of_levels()) << ',' << model.total_words() << ','
      << io::format_sig6(sum(report.be.predicted_counts)) << ','
      << (report.mb ? io::format_sig6(sum(report.mb->predicted_counts)) : std::string()) << ','
      << io::format_sig6(model.total_energy()) << ',' << io::format_sig6(sum(report.be.predicted_radiated))
      << ',' << (report.mb ? io::format_sig6(sum(report.mb->predicted_radiated)) : std::string()) << '\n';
  return out.str();
}

namespace {

std::string figure_csv(const EnergyModel& model, const FitReport& report, bool loglog, bool radiated) {
  std::ostringstream out;
  out << (radiated ? "E_i,Erad_data,Erad_BE,Erad_MB\n" : "E_i,N_data,N_BE,N_MB\n");
  for (std::size_t k = 0; k < model.size(); ++k) {
    const double e = model.levels()[k];
    const double data = radiated ? model.radiated()[k] : static_cast<double>(model.counts()[k]);
    const double be = radiated ? report.be.predicted_radiated[k] : report.be.predicted_counts[k];
    std::optional<double> mb;
    if (report.mb) mb = radiated ? report.mb->predicted_radiated[k] : report.mb->predicted_counts[k];
    if (loglog && (!(e > 0.0) || !(data > 0.0) || !(be > 0.0) || (mb && !(*mb > 0.0)))) continue;
    out << io::format_sig6(e) << ',' << io::format_sig6(data) << ',' << io::format_sig6(be) << ','
        << (mb ? io::format_sig6(*mb) : std::string()) << '\n';
  }
  return out.str();
}

}  // namespace

std::string occupancy_figure_csv(const EnergyModel& model, const FitReport& report, bool loglog) {
  return figure_csv(model, report, loglog, false);
}

std::string radiated_figure_csv(const EnergyModel& model, const FitReport& report, bool loglog) {
  return figure_csv(model, report, loglog, true);
}

}  // namespace cogstat
