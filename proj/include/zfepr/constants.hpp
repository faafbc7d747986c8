#pragma once

#include <numbers>

namespace zfepr::constants {

// Energies are carried as frequencies (E/h) in MHz, fields in tesla.

inline constexpr double bohr_magneton_mhz_per_tesla = 13996.2449;    // beta_e / h
inline constexpr double nuclear_magneton_mhz_per_tesla = 7.62259;    // beta_n / h

inline constexpr double planck = 6.62607015e-34;                     // J s
inline constexpr double hbar = planck / (2.0 * std::numbers::pi);
inline constexpr double boltzmann = 1.380649e-23;                    // J / K
inline constexpr double vacuum_permeability = 1.25663706212e-6;      // T m / A

// h * (1 MHz) / k_B, in kelvin.
inline constexpr double kelvin_per_mhz = planck * 1.0e6 / boltzmann;

// Yttrium site density of Y2SiO5.
inline constexpr double yso_yttrium_density = 1.83e28;               // m^-3

}  // namespace zfepr::constants
