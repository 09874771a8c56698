#include "cogstat/radiance.hpp"

#include <cmath>

#include "cogstat/errors.hpp"

namespace cogstat::radiance {

namespace {

struct Terms {
  double prefactor;
  double x;  // h nu / k T
};

Terms terms(double nu, double temperature) {
  if (!(nu > 0.0) || !(temperature > 0.0) || !std::isfinite(nu) || !std::isfinite(temperature)) {
    throw NonPositiveInput("radiance needs positive, finite frequency and temperature");
  }
  const double prefactor = 2.0 * kPlanck * nu * nu * nu / (kLightSpeed * kLightSpeed);
  return {prefactor, kPlanck * nu / (kBoltzmann * temperature)};
}

}  // namespace

double wien_radiance(double nu, double temperature) {
  const auto t = terms(nu, temperature);
  return t.prefactor / std::exp(t.x);
}

double planck_radiance(double nu, double temperature) {
  const auto t = terms(nu, temperature);
  return t.prefactor / std::expm1(t.x);
}

}  // namespace cogstat::radiance
