#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

namespace testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(COGSTAT_FIXTURES_DIR) / name;
}

// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("cogstat_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
  long long integer(long long lo, long long hi) { return std::uniform_int_distribution<long long>(lo, hi)(gen_); }
  bool coin() { return integer(0, 1) == 1; }
  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

inline bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

}  // namespace testing
