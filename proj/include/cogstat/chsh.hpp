#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "json.hpp"

namespace cogstat {

/// The four coincidence measurements of the CHSH setup; `p` marks the primed
/// measurement (ABp is AB').
enum class Block { AB, ABp, ApB, ApBp };

inline constexpr std::array<Block, 4> kAllBlocks{Block::AB, Block::ABp, Block::ApB, Block::ApBp};

std::string to_string(Block b);
std::optional<Block> block_from_string(std::string_view name);

/// Outcome probabilities of one coincidence measurement, indexed by the
/// outcome signs: p11 = (+1,+1), p22 = (-1,-1), p12 = (+1,-1), p21 = (-1,+1).
struct OutcomeProbabilities {
  double p11 = 0.0;
  double p22 = 0.0;
  double p12 = 0.0;
  double p21 = 0.0;

  friend bool operator==(const OutcomeProbabilities&, const OutcomeProbabilities&) = default;
};

/// Blocks accept sums within this distance of 1 so that tables published
/// with three decimals validate.
inline constexpr double kBlockSumTolerance = 5e-3;

struct CoincidenceTable {
  std::array<OutcomeProbabilities, 4> blocks{};

  OutcomeProbabilities& operator[](Block b) { return blocks[static_cast<std::size_t>(b)]; }
  const OutcomeProbabilities& operator[](Block b) const { return blocks[static_cast<std::size_t>(b)]; }

  friend bool operator==(const CoincidenceTable&, const CoincidenceTable&) = default;
};

/// Throws InvalidProbabilities (prefixed with `label`) when a probability is
/// outside [0, 1] or the block does not sum to 1 within kBlockSumTolerance.
void validate_block(const OutcomeProbabilities& p, const std::string& label = "block");

/// p11 + p22 - p12 - p21, after validation.
double expectation(const OutcomeProbabilities& p);

enum class Classification { classical, quantum_violation, beyond_tsirelson };

std::string to_string(Classification c);

inline const double kTsirelsonBound = 2.0 * 1.4142135623730951;

/// classical for |S| <= 2, quantum_violation up to 2*sqrt(2), beyond_tsirelson above.
Classification classify(double chsh);

struct ChshResult {
  double e_ab = 0.0;
  double e_abp = 0.0;
  double e_apb = 0.0;
  double e_apbp = 0.0;
  double chsh = 0.0;  ///< E(A',B') + E(A',B) + E(A,B') - E(A,B)
  Classification classification = Classification::classical;
};

ChshResult chsh_term(const CoincidenceTable& table);

struct TTestSummary {
  double sample_mean = 0.0;
  double sample_sd = 0.0;
  std::size_t n = 0;
  double t_statistic = 0.0;
  double p_value = 1.0;  ///< two-sided, Student t with n - 1 degrees of freedom
};

/// One-sample t-test of per-subject CHSH values against `bound`.
/// Throws DegenerateSample for n < 2 or zero sample variance.
TTestSummary t_test_vs_bound(std::span<const double> samples, double bound = 2.0);

/// Parses {"AB":{"p11":..,"p22":..,"p12":..,"p21":..}, "ABp":{..}, "ApB":{..}, "ApBp":{..}}.
/// Throws SchemaError naming the offending field path, or
/// InvalidProbabilities when a block fails validation.
CoincidenceTable table_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CoincidenceTable& table);
nlohmann::json to_json(const ChshResult& result);
nlohmann::json to_json(const TTestSummary& summary);

}  // namespace cogstat
