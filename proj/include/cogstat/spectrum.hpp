#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cogstat/text_ingest.hpp"

namespace cogstat {

/// Energy ladder E_i = (i-1)^d for i = 1..n. The ground level is 0 for every
/// finite d, including d = 0 and d < 0 where the power itself is undefined.
/// Throws InvalidExponent for non-finite d and InputError for n == 0.
std::vector<double> energy_levels(std::size_t n, double d);

/// A ranked spectrum placed on an energy ladder. Level i (0-based here) holds
/// the i-th most frequent word; energies are dimensionless base units.
class EnergyModel {
 public:
  /// Counts must be positive; words may be empty (synthetic models) or
  /// aligned with counts.
  EnergyModel(double d, std::vector<std::int64_t> counts, std::vector<std::string> words = {});

  double d() const noexcept { return d_; }
  std::size_t size() const noexcept { return levels_.size(); }
  const std::vector<double>& levels() const noexcept { return levels_; }
  const std::vector<std::int64_t>& counts() const noexcept { return counts_; }
  const std::vector<std::string>& words() const noexcept { return words_; }
  const std::vector<double>& radiated() const noexcept { return radiated_; }

  std::int64_t total_words() const noexcept { return total_words_; }
  double total_energy() const noexcept { return total_energy_; }
  double sum_of_levels() const noexcept;

  friend bool operator==(const EnergyModel&, const EnergyModel&) = default;

 private:
  double d_;
  std::vector<double> levels_;
  std::vector<std::int64_t> counts_;
  std::vector<std::string> words_;
  std::vector<double> radiated_;
  std::int64_t total_words_ = 0;
  double total_energy_ = 0.0;
};

EnergyModel build_energy_model(const WordSpectrum& spectrum, double d);

/// N(E_i)·E_i for the 1-based level index i. Throws IndexOutOfRange.
double radiated_energy(const EnergyModel& model, std::size_t i);

/// CSV with header word,i,E_i,N_data,E_radiated_data, one row per level and a
/// totals row whose `i` field is empty. Reals carry 6 significant digits.
std::string spectrum_csv(const EnergyModel& model);

/// Parses a spectrum CSV (either the plain layout above or the fitted table
/// layout, which shares the word/i/N_data columns) and rebuilds the model on
/// the ladder for `d`. Words and counts are exact; E_i is checked against the
/// recomputed ladder at the printed precision.
EnergyModel parse_spectrum_csv(std::string_view csv, double d);

}  // namespace cogstat
