#include <cmath>
#include <functional>
#include <limits>

#include "cogstat/distfit.hpp"
#include "cogstat/errors.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"

using namespace cogstat;
using doctest::Approx;

namespace {

using testing::be_occ;
using testing::grid_oracle;
using testing::mb_occ;
using testing::profile_oracle;

struct Totals {
  double N = 0.0, E = 0.0;
};

template <class F>
Totals totals(const std::vector<double>& levels, F&& occ) {
  Totals t;
  for (double L : levels) {
    t.N += occ(L);
    t.E += occ(L) * L;
  }
  return t;
}

}  // namespace

TEST_CASE("BE and MB fits at the story constraints") {
  const auto levels = energy_levels(822, 0.8);
  const auto be = fit_be(levels, 2861.0, 145694.86);
  CHECK(be.predicted_counts[0] == Approx(185.36).epsilon(0.5 / 185.36));
  CHECK(be.predicted_counts[1] == Approx(103.39).epsilon(0.5 / 103.39));
  CHECK(be.predicted_counts[821] == Approx(0.6668).epsilon(0.005 / 0.6668));
  CHECK(std::abs(be.residual_N) / 2861.0 <= 1e-6);
  CHECK(std::abs(be.residual_E) / 145694.86 <= 1e-6);
  CHECK(be.p1 > 1.0);

  const auto mb = fit_mb(levels, 2861.0, 145694.86);
  CHECK(mb.predicted_counts[0] == Approx(23.228).epsilon(0.05 / 23.228));
  CHECK(mb.predicted_counts[1] == Approx(22.692).epsilon(0.05 / 22.692));
  CHECK(mb.predicted_counts[821] == Approx(0.1548).epsilon(0.002 / 0.1548));
  CHECK(std::abs(mb.residual_N) / 2861.0 <= 1e-6);
  CHECK(std::abs(mb.residual_E) / 145694.86 <= 1e-6);
}

TEST_CASE("3-level synthetic fit matches the grid oracle") {
  const auto levels = energy_levels(3, 1.0);
  const auto fit = fit_be(levels, 10.0, 5.0);
  const auto [alpha, B] = grid_oracle(levels, 10.0, 5.0, be_occ, std::log(1e-8), std::log(std::log(50.0)),
                                       std::log(1e-3), std::log(50.0));
  CHECK(testing::rel_close(fit.p1, std::exp(alpha), 1e-4));
  CHECK(testing::rel_close(fit.p2, B, 1e-4));
}

TEST_CASE("random small instances match the grid oracle") {
  testing::Rng rng(20240601);
  for (int k = 0; k < 24; ++k) {
    const auto n = static_cast<std::size_t>(rng.integer(2, 5));
    const auto levels = energy_levels(n, rng.uniform(0.5, 1.5));
    CAPTURE(k);
    CAPTURE(n);

    const double alpha = rng.log_uniform(0.05, 3.0), B = rng.log_uniform(0.3, 20.0);
    const auto be_t = totals(levels, [&](double L) { return be_occ(alpha, B, L); });
    const auto be = fit_be(levels, be_t.N, be_t.E);
    const auto [oa, ob] = profile_oracle(levels, be_t.N, be_t.E, true);
    CHECK(testing::rel_close(be.p1, oa, 1e-4));
    CHECK(testing::rel_close(be.p2, ob, 1e-4));
    CHECK(testing::rel_close(be.p2, B, 1e-4));

    const double C = rng.log_uniform(0.01, 2.0), D = rng.log_uniform(0.3, 20.0);
    const auto mb_t = totals(levels, [&](double L) { return mb_occ(C, D, L); });
    const auto mb = fit_mb(levels, mb_t.N, mb_t.E);
    const auto [oc, od] = profile_oracle(levels, mb_t.N, mb_t.E, false);
    CHECK(testing::rel_close(mb.p1, oc, 1e-4));
    CHECK(testing::rel_close(mb.p2, od, 1e-4));
    CHECK(testing::rel_close(mb.p2, D, 1e-4));
  }
}

TEST_CASE("BE solvers agree") {
  FitOptions newton;
  newton.be_solver = BeSolver::DampedNewton;
  const auto levels = energy_levels(822, 0.8);
  const auto a = fit_be(levels, 2861.0, 145694.86);
  const auto b = fit_be(levels, 2861.0, 145694.86, newton);
  CHECK(testing::rel_close(a.p1, b.p1, 1e-6));
  CHECK(testing::rel_close(a.p2, b.p2, 1e-6));
}

TEST_CASE("MB mean-energy equation") {
  const auto levels = energy_levels(50, 0.9);
  const auto mb = fit_mb(levels, 400.0, 3000.0);
  double z = 0.0, ze = 0.0;
  for (double L : levels) {
    z += std::exp(-L / mb.p2);
    ze += L * std::exp(-L / mb.p2);
  }
  CHECK(std::abs(ze / z - 3000.0 / 400.0) <= 1e-10 * 7.5);
  CHECK(mb.p1 == Approx(z / 400.0).epsilon(1e-12));
}

TEST_CASE("flat two-level spectrum has no finite solution") {
  const EnergyModel flat(1.0, {1, 1});
  CHECK_THROWS_AS(fit_mb(flat), ConvergenceError);
  CHECK_THROWS_AS(fit_be(flat), ConvergenceError);
}

TEST_CASE("degenerate inputs") {
  CHECK_THROWS_AS(fit_be(EnergyModel(0.8, {7}), {}), DegenerateSpectrum);
  CHECK_THROWS_AS(fit_mb(EnergyModel(0.8, {7}), {}), DegenerateSpectrum);
  const std::vector<double> levels{0.0, 1.0, 2.0};
  CHECK_THROWS_AS(fit_be(levels, 3.0, 0.0), DegenerateSpectrum);
  // Mean energy above the top level cannot be matched by a decreasing occupancy.
  CHECK_THROWS_AS(fit_mb(levels, 3.0, 9.0), ConvergenceError);
  CHECK_THROWS_AS(fit_be(levels, 3.0, 9.0), ConvergenceError);
}

TEST_CASE("goodness_of_fit") {
  const std::vector<double> same{3, 2, 1};
  CHECK(goodness_of_fit(same, same) == std::pair<double, double>{0.0, 0.0});
  const auto [raw, lg] = goodness_of_fit(std::vector<double>{2, 1}, std::vector<double>{1, 2});
  CHECK(raw == Approx(1.0));
  CHECK(lg == Approx(std::log(2.0)));
  CHECK_THROWS_AS(goodness_of_fit(std::vector<double>{1, 2}, std::vector<double>{1}), LengthMismatch);
  CHECK_THROWS_AS(goodness_of_fit(std::vector<double>{1, 2}, std::vector<double>{1, 0}), NonPositiveInput);
}

namespace {

WordSpectrum be_corpus(double d, double A, double B, std::size_t n) {
  const auto levels = energy_levels(n, d);
  std::vector<WordCount> entries;
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::int64_t>(std::llround(1.0 / (A * std::exp(levels[i] / B) - 1.0)));
    if (c <= 0) break;
    char name[16];
    std::snprintf(name, sizeof name, "w%04zu", i);
    entries.push_back({name, c});
  }
  return WordSpectrum::from_entries(std::move(entries));
}

}  // namespace

TEST_CASE("BE-generated corpus: BE wins and the grid recovers d") {
  const auto spectrum = be_corpus(1.0, 1.01, 300.0, 200);
  const auto report = fit_report(build_energy_model(spectrum, 1.0));
  CHECK(report.winner == Family::BE);
  REQUIRE(report.mb.has_value());
  CHECK(report.be.rmse_log_counts < report.mb->rmse_log_counts);

  const auto grid = make_d_grid(0.5, 1.5, 0.05);
  const auto searched = search_d(spectrum, grid);
  CHECK(std::abs(searched.d_used - 1.0) <= 0.05 + 1e-12);
  CHECK(searched.grid.size() == grid.size());
}

TEST_CASE("search_d edge cases") {
  const auto spectrum = be_corpus(1.0, 1.05, 30.0, 60);
  CHECK(search_d(spectrum, std::vector<double>{1.0}).d_used == 1.0);
  CHECK_THROWS_AS(search_d(spectrum, std::vector<double>{}), InputError);
  CHECK_THROWS_AS(search_d(spectrum, std::vector<double>{1.0, 0.9}), InputError);
  CHECK_THROWS_AS(search_d(spectrum, std::vector<double>{-0.5, 1.0}), InputError);
  CHECK_THROWS_AS(search_d(WordSpectrum::from_entries({{"a", 1}, {"b", 1}}), std::vector<double>{0.8, 1.0}),
                  AllFitsFailed);
}

TEST_CASE("d grid construction") {
  const auto g = make_d_grid(0.5, 1.5, 0.05);
  REQUIRE(g.size() == 21);
  CHECK(g[6] == 0.8);
  CHECK(g.back() == 1.5);
  CHECK(parse_d_grid("0.5:1.5:0.05") == g);
  CHECK_THROWS_AS(parse_d_grid("0.5:1.5"), InputError);
  CHECK_THROWS_AS(parse_d_grid("a:b:c"), InputError);
  CHECK_THROWS_AS(make_d_grid(1.0, 0.5, 0.1), InputError);
  CHECK_THROWS_AS(make_d_grid(0.5, 1.0, 0.0), InputError);
}

TEST_CASE("report outputs") {
  const auto spectrum = be_corpus(0.8, 1.02, 40.0, 80);
  const auto model = build_energy_model(spectrum, 0.8);
  const auto report = fit_report(model);

  const auto table = fit_table_csv(model, report);
  CHECK(table.rfind("word,i,E_i,N_data,N_BE,N_MB,Erad_data,Erad_BE,Erad_MB\n", 0) == 0);
  CHECK(table.find("\nTOTAL,,") != std::string::npos);

  const auto linear = occupancy_figure_csv(model, report, false);
  const auto loglog = occupancy_figure_csv(model, report, true);
  const auto lines = [](const std::string& s) { return std::count(s.begin(), s.end(), '\n'); };
  CHECK(lines(linear) == static_cast<long>(model.size()) + 1);
  CHECK(lines(loglog) == static_cast<long>(model.size()));  // ground level has E = 0
  CHECK(lines(radiated_figure_csv(model, report, true)) == static_cast<long>(model.size()));

  const auto j = to_json(report);
  CHECK(j["winner"] == "BE");
  CHECK(j["be"]["A"].get<double>() == report.be.p1);
  CHECK(j["mb"]["D"].get<double>() == report.mb->p2);
}
