#pragma once

#include <Eigen/Dense>

#include "zfepr/spin_model.hpp"

namespace zfepr {

/// Doped-crystal ensemble. host_site_density counts yttrium sites of all classes.
struct EnsembleSpec {
  double dopant_fraction = 50e-6;
  double host_site_density = 1.83e28;  // m^-3
  double sample_volume = 0.0;          // m^3
  int sites_per_ion_class = 2;

  void validate() const;
};

/// Single resonator mode. Rates are ordinary-frequency widths (kappa / 2 pi) in MHz.
struct CavityMode {
  double frequency = 0.0;        // MHz
  double linewidth_kappa = 0.0;  // MHz, total energy decay rate (FWHM)
  double kappa_ext = 0.0;        // MHz, per-port coupling rate
  double mode_volume = 0.0;      // m^3
  double filling_factor = 1.0;

  void validate() const;
  [[nodiscard]] double quality_factor() const { return frequency / linewidth_kappa; }
};

/// Volume of a cylindrical sample, m^3.
double cylinder_volume(double diameter_m, double length_m);

double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);

/// Boltzmann weights of levels given in MHz; offset to the lowest level so that
/// arbitrarily low temperatures do not overflow.
Eigen::VectorXd boltzmann_populations(const Eigen::VectorXd& energies_mhz, double temperature_kelvin);
Eigen::VectorXd boltzmann_populations(const EnergyLevels& levels, double temperature_kelvin);

/// Ions of one site class in the sample.
double ion_count(const EnsembleSpec& spec);

/// N_total * (p_lower - p_upper).
double population_difference_count(double n_total, const EnergyLevels& levels, double temperature_kelvin,
                                   int lower, int upper);

/// Vacuum rms magnetic field sqrt(mu0 h f / 2V), tesla.
double single_photon_field(const CavityMode& mode);

/// Single-spin coupling g / 2 pi in MHz for a transition moment in MHz/T.
double single_spin_coupling(double dipole_element, const CavityMode& mode);

/// sqrt(dN) * g / 2 pi in MHz.
double collective_coupling(double dipole_element, const CavityMode& mode, double population_difference);
double collective_coupling(const Transition& tr, const CavityMode& mode, double population_difference);

/// 4 kappa_ext / kappa: stored-energy correction relative to U = P Q / omega.
double coupling_correction(const CavityMode& mode);

/// Intracavity photons at resonance: n = c * P Q / (hbar omega^2).
/// `coupling_factor` multiplies the idealized stored energy; see coupling_correction().
double photon_number(const CavityMode& mode, double input_power_watts, double coupling_factor = 1.0);

/// Driving Rabi frequency Omega / 2 pi = 2 g sqrt(n), MHz.
double rabi_frequency(double single_spin_coupling_mhz, double photon_count);

}  // namespace zfepr
