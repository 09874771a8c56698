#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cogstat/spectrum.hpp"
#include "cogstat/text_ingest.hpp"
#include "json.hpp"

namespace cogstat {

enum class Family { BE, MB };

std::string to_string(Family f);

/// One fitted occupancy curve.
///
/// Bose-Einstein:       N(E_i) = 1 / (A exp(E_i / B) - 1),  p1 = A, p2 = B
/// Maxwell-Boltzmann:   N(E_i) = exp(-E_i / D) / C,         p1 = C, p2 = D
///
/// Both parameter pairs are fixed by requiring the predicted occupancies to
/// reproduce the total word count N and the total energy E.
struct DistributionFit {
  Family family = Family::BE;
  double p1 = 0.0;
  double p2 = 0.0;
  std::vector<double> predicted_counts;
  std::vector<double> predicted_radiated;
  double residual_N = 0.0;  ///< sum(predicted) - N
  double residual_E = 0.0;  ///< sum(predicted * E_i) - E
  double rmse_counts = 0.0;
  double rmse_log_counts = 0.0;
  int iterations = 0;
};

struct GridPoint {
  double d = 0.0;
  bool converged = false;
  double rmse_log_counts = 0.0;
  std::string error;
};

struct FitReport {
  DistributionFit be;
  std::optional<DistributionFit> mb;  ///< absent when the MB fit failed
  double d_used = 0.0;
  Family winner = Family::BE;
  std::vector<GridPoint> grid;  ///< per-d BE scores when produced by search_d
};

enum class BeSolver {
  NestedMonotone,  ///< inner solve of A from the N-constraint, outer solve in B
  DampedNewton,    ///< 2-D damped Newton on both constraints at once
};

struct FitOptions {
  double rel_tol = 1e-10;
  int max_outer_iterations = 200;
  BeSolver be_solver = BeSolver::NestedMonotone;
};

/// Constraint-only BE fit: `levels` is the ladder, N and E the totals to match.
/// Throws DegenerateSpectrum when fewer than two levels or E <= 0, and
/// NoConvergence (with best residuals) when the equations have no solution in
/// the search box or the solver stalls.
DistributionFit fit_be(std::span<const double> levels, double N, double E, const FitOptions& opts = {});
DistributionFit fit_mb(std::span<const double> levels, double N, double E, const FitOptions& opts = {});

/// Fits against a model's totals and scores the prediction against its counts.
DistributionFit fit_be(const EnergyModel& model, const FitOptions& opts = {});
DistributionFit fit_mb(const EnergyModel& model, const FitOptions& opts = {});

/// Root mean squared error on raw counts over every level, and on natural
/// logs over the levels whose data count is positive.
std::pair<double, double> goodness_of_fit(std::span<const double> data_counts,
                                          std::span<const double> predicted_counts);

/// BE and MB fits at a fixed exponent; the winner has the lower
/// rmse_log_counts, then the lower rmse_counts, then BE.
FitReport fit_report(const EnergyModel& model, const FitOptions& opts = {});

/// Fits BE at every grid exponent (in parallel, merged in grid order) and
/// returns the report for the exponent with the lowest BE rmse_log_counts.
/// Ties go to the exponent closest to 1, then to the smaller one.
FitReport search_d(const WordSpectrum& spectrum, std::span<const double> d_grid,
                   const FitOptions& opts = {});

/// MIN:MAX:STEP inclusive grid, e.g. "0.5:1.5:0.05". Values are rounded to
/// 12 decimals so 0.5 + 6*0.05 prints and compares as 0.8.
std::vector<double> make_d_grid(double min, double max, double step);
std::vector<double> parse_d_grid(const std::string& spec);

nlohmann::json to_json(const DistributionFit& fit, bool with_curves = false);
nlohmann::json to_json(const FitReport& report);

/// Table-shaped CSV: word,i,E_i,N_data,N_BE,N_MB,Erad_data,Erad_BE,Erad_MB
/// plus a totals row. MB columns are empty when the MB fit is absent.
std::string fit_table_csv(const EnergyModel& model, const FitReport& report);

/// (E_i, N_data, N_BE, N_MB); the log-log variant drops rows with any
/// non-positive value.
std::string occupancy_figure_csv(const EnergyModel& model, const FitReport& report, bool loglog);

/// (E_i, Erad_data, Erad_BE, Erad_MB); same log-log rule.
std::string radiated_figure_csv(const EnergyModel& model, const FitReport& report, bool loglog);

}  // namespace cogstat
