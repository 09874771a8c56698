#include "cogstat/spectrum.hpp"

#include <algorithm>

#include <cmath>
#include <numeric>
#include <sstream>

#include "cogstat/errors.hpp"
#include "cogstat/io.hpp"

namespace cogstat {

std::vector<double> energy_levels(std::size_t n, double d) {
  if (!std::isfinite(d)) throw InvalidExponent("energy exponent d must be finite");
  if (n == 0) throw InputError("energy ladder needs at least one level");
  std::vector<double> levels(n);
  levels[0] = 0.0;
  for (std::size_t i = 1; i < n; ++i) levels[i] = std::pow(static_cast<double>(i), d);
  return levels;
}

EnergyModel::EnergyModel(double d, std::vector<std::int64_t> counts, std::vector<std::string> words)
    : d_(d), counts_(std::move(counts)), words_(std::move(words)) {
  if (counts_.empty()) throw EmptyCorpus();
  if (!words_.empty() && words_.size() != counts_.size()) {
    throw LengthMismatch("energy model: words and counts differ in length");
  }
  levels_ = energy_levels(counts_.size(), d_);
  radiated_.resize(counts_.size());
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (counts_[i] <= 0) throw NonPositiveInput("energy model: non-positive count at level " + std::to_string(i + 1));
    total_words_ += counts_[i];
    radiated_[i] = static_cast<double>(counts_[i]) * levels_[i];
  }
  total_energy_ = std::accumulate(radiated_.begin(), radiated_.end(), 0.0);
}

double EnergyModel::sum_of_levels() const noexcept {
  return std::accumulate(levels_.begin(), levels_.end(), 0.0);
}

EnergyModel build_energy_model(const WordSpectrum& spectrum, double d) {
  if (spectrum.empty()) throw EmptyCorpus();
  std::vector<std::string> words;
  words.reserve(spectrum.distinct_words());
  for (const auto& e : spectrum.entries()) words.push_back(e.word);
  return EnergyModel(d, spectrum.counts(), std::move(words));
}

double radiated_energy(const EnergyModel& model, std::size_t i) {
  if (i < 1 || i > model.size()) {
    throw IndexOutOfRange("level index " + std::to_string(i) + " outside 1.." +
                          std::to_string(model.size()));
  }
  return model.radiated()[i - 1];
}

std::string spectrum_csv(const EnergyModel& model) {
  std::ostringstream out;
  out << "word,i,E_i,N_data,E_radiated_data\n";
  for (std::size_t k = 0; k < model.size(); ++k) {
    out << io::csv_escape(model.words().empty() ? std::string() : model.words()[k]) << ','
        << (k + 1) << ',' << io::format_sig6(model.levels()[k]) << ',' << model.counts()[k] << ','
        << io::format_sig6(model.radiated()[k]) << '\n';
  }
  out << "TOTAL,," << io::format_sig6(model.sum_of_levels()) << ',' << model.total_words() << ','
      << io::format_sig6(model.total_energy()) << '\n';
  return out.str();
}

namespace {

std::size_t column_index(const std::vector<std::string>& header, std::string_view name) {
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == name) return k;
  }
  throw SchemaError("header", "missing column '" + std::string(name) + "'");
}

}  // namespace

EnergyModel parse_spectrum_csv(std::string_view csv, double d) {
  const auto lines = io::split_lines(csv);
  if (lines.empty()) throw SchemaError("header", "empty CSV");
  const auto header = io::csv_split(lines[0]);
  const std::size_t c_word = column_index(header, "word");
  const std::size_t c_i = column_index(header, "i");
  const std::size_t c_e = column_index(header, "E_i");
  const std::size_t c_n = column_index(header, "N_data");

  std::vector<std::string> words;
  std::vector<std::int64_t> counts;
  std::vector<double> printed_levels;
  for (std::size_t row = 1; row < lines.size(); ++row) {
    if (lines[row].empty()) continue;
    const auto f = io::csv_split(lines[row]);
    const std::string where = "row " + std::to_string(row + 1);
    if (f.size() != header.size()) throw SchemaError(where, "wrong number of fields");
    if (f[c_i].empty()) continue;  // totals row
    std::size_t idx = 0;
    std::int64_t count = 0;
    double level = 0.0;
    try {
      idx = std::stoul(f[c_i]);
      count = std::stoll(f[c_n]);
      level = std::stod(f[c_e]);
    } catch (const std::exception&) {
      throw SchemaError(where, "non-numeric i, E_i or N_data");
    }
    if (idx != counts.size() + 1) throw SchemaError(where + "/i", "levels must be listed in order 1..n");
    words.push_back(f[c_word]);
    counts.push_back(count);
    printed_levels.push_back(level);
  }
  if (counts.empty()) throw EmptyCorpus();
  if (std::all_of(words.begin(), words.end(), [](const std::string& w) { return w.empty(); })) words.clear();
  EnergyModel model(d, std::move(counts), std::move(words));
  for (std::size_t k = 0; k < model.size(); ++k) {
    const double expect = std::stod(io::format_sig6(model.levels()[k]));
    if (printed_levels[k] != expect) {
      throw SchemaError("row " + std::to_string(k + 2) + "/E_i",
                        "does not match the energy ladder for d=" + io::format_exact(d));
    }
  }
  return model;
}

}  // namespace cogstat
