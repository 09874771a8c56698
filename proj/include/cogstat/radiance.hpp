#pragma once

namespace cogstat::radiance {

// CODATA 2018 exact values (SI).
inline constexpr double kPlanck = 6.62607015e-34;     // J s
inline constexpr double kLightSpeed = 299792458.0;    // m / s
inline constexpr double kBoltzmann = 1.380649e-23;    // J / K

/// Wien approximation (2 h nu^3 / c^2) exp(-h nu / k T), in W sr^-1 m^-2 Hz^-1.
/// Throws NonPositiveInput unless nu > 0 and T > 0.
double wien_radiance(double nu, double temperature);

/// Planck law (2 h nu^3 / c^2) / (exp(h nu / k T) - 1), same units.
double planck_radiance(double nu, double temperature);

}  // namespace cogstat::radiance
