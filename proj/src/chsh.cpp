#include "cogstat/chsh.hpp"

#include <cmath>

#include "cogstat/errors.hpp"
#include "cogstat/student_t.hpp"

namespace cogstat {

std::string to_string(Block b) {
  switch (b) {
    case Block::AB:
      return "AB";
    case Block::ABp:
      return "ABp";
    case Block::ApB:
      return "ApB";
    case Block::ApBp:
      return "ApBp";
  }
  return "?";
}

std::optional<Block> block_from_string(std::string_view name) {
  for (Block b : kAllBlocks) {
    if (to_string(b) == name) return b;
  }
  return std::nullopt;
}

std::string to_string(Classification c) {
  switch (c) {
    case Classification::classical:
      return "classical";
    case Classification::quantum_violation:
      return "quantum_violation";
    case Classification::beyond_tsirelson:
      return "beyond_tsirelson";
  }
  return "?";
}

void validate_block(const OutcomeProbabilities& p, const std::string& label) {
  const std::array<std::pair<const char*, double>, 4> fields{
      {{"p11", p.p11}, {"p22", p.p22}, {"p12", p.p12}, {"p21", p.p21}}};
  for (const auto& [name, value] : fields) {
    if (!(value >= 0.0 && value <= 1.0)) {
      throw InvalidProbabilities(label + "." + name + " = " + std::to_string(value) + " is outside [0, 1]");
    }
  }
  const double total = p.p11 + p.p22 + p.p12 + p.p21;
  if (std::abs(total - 1.0) > kBlockSumTolerance) {
    throw InvalidProbabilities(label + " sums to " + std::to_string(total) + ", not 1");
  }
}

double expectation(const OutcomeProbabilities& p) {
  validate_block(p);
  return p.p11 + p.p22 - p.p12 - p.p21;
}

Classification classify(double chsh) {
  const double s = std::abs(chsh);
  if (s <= 2.0) return Classification::classical;
  if (s <= kTsirelsonBound) return Classification::quantum_violation;
  return Classification::beyond_tsirelson;
}

ChshResult chsh_term(const CoincidenceTable& table) {
  for (Block b : kAllBlocks) validate_block(table[b], to_string(b));
  ChshResult r;
  r.e_ab = expectation(table[Block::AB]);
  r.e_abp = expectation(table[Block::ABp]);
  r.e_apb = expectation(table[Block::ApB]);
  r.e_apbp = expectation(table[Block::ApBp]);
  r.chsh = r.e_apbp + r.e_apb + r.e_abp - r.e_ab;
  r.classification = classify(r.chsh);
  return r;
}

TTestSummary t_test_vs_bound(std::span<const double> samples, double bound) {
  if (samples.size() < 2) throw DegenerateSample("t-test needs at least two samples");
  TTestSummary s;
  s.n = samples.size();
  double sum = 0.0;
  for (double x : samples) sum += x;
  s.sample_mean = sum / static_cast<double>(s.n);
  double ss = 0.0;
  for (double x : samples) ss += (x - s.sample_mean) * (x - s.sample_mean);
  s.sample_sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  if (!(s.sample_sd > 0.0)) throw DegenerateSample("t-test samples have zero variance");
  s.t_statistic = (s.sample_mean - bound) / (s.sample_sd / std::sqrt(static_cast<double>(s.n)));
  s.p_value = stats::student_t_two_sided_p(s.t_statistic, static_cast<double>(s.n - 1));
  return s;
}

namespace {

double probability_field(const nlohmann::json& block, const std::string& path, const char* key) {
  if (!block.contains(key)) throw SchemaError(path + "/" + key, "missing");
  const auto& v = block[key];
  if (!v.is_number()) throw SchemaError(path + "/" + key, "expected a number");
  return v.get<double>();
}

}  // namespace

CoincidenceTable table_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("", "expected an object with keys AB, ABp, ApB, ApBp");
  CoincidenceTable table;
  for (Block b : kAllBlocks) {
    const std::string key = to_string(b);
    const std::string path = "/" + key;
    if (!j.contains(key)) throw SchemaError(path, "missing");
    const auto& block = j[key];
    if (!block.is_object()) throw SchemaError(path, "expected an object");
    OutcomeProbabilities p;
    p.p11 = probability_field(block, path, "p11");
    p.p22 = probability_field(block, path, "p22");
    p.p12 = probability_field(block, path, "p12");
    p.p21 = probability_field(block, path, "p21");
    validate_block(p, key);
    table[b] = p;
  }
  return table;
}

nlohmann::json to_json(const CoincidenceTable& table) {
  nlohmann::json j = nlohmann::json::object();
  for (Block b : kAllBlocks) {
    const auto& p = table[b];
    j[to_string(b)] = {{"p11", p.p11}, {"p22", p.p22}, {"p12", p.p12}, {"p21", p.p21}};
  }
  return j;
}

nlohmann::json to_json(const ChshResult& r) {
  return {{"e_ab", r.e_ab},
          {"e_abp", r.e_abp},
          {"e_apb", r.e_apb},
          {"e_apbp", r.e_apbp},
          {"chsh", r.chsh},
          {"classification", to_string(r.classification)}};
}

nlohmann::json to_json(const TTestSummary& s) {
  return {{"sample_mean", s.sample_mean},
          {"sample_sd", s.sample_sd},
          {"n", s.n},
          {"t_statistic", s.t_statistic},
          {"p_value", s.p_value}};
}

}  // namespace cogstat
