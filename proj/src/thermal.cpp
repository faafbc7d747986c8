#include "zfepr/thermal.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "zfepr/constants.hpp"
#include "zfepr/errors.hpp"

namespace zfepr {

void EnsembleSpec::validate() const {
  if (!(dopant_fraction >= 0.0 && dopant_fraction < 1.0)) throw ValidationError("dopant_fraction must lie in [0, 1)");
  if (!(host_site_density > 0.0)) throw ValidationError("host_site_density must be > 0");
  if (!(sample_volume > 0.0)) throw ValidationError("sample_volume must be > 0");
  if (sites_per_ion_class < 1) throw ValidationError("sites_per_ion_class must be >= 1");
}

void CavityMode::validate() const {
  if (!(frequency > 0.0)) throw ValidationError("cavity frequency must be > 0");
  if (!(linewidth_kappa > 0.0)) throw ValidationError("linewidth_kappa must be > 0");
  if (!(kappa_ext > 0.0 && kappa_ext <= linewidth_kappa)) {
    throw ValidationError("kappa_ext must satisfy 0 < kappa_ext <= linewidth_kappa");
  }
  if (!(mode_volume > 0.0)) throw ValidationError("mode_volume must be > 0");
  if (!(filling_factor > 0.0 && filling_factor <= 1.0)) throw ValidationError("filling_factor must lie in (0, 1]");
}

double cylinder_volume(double diameter_m, double length_m) {
  return std::numbers::pi * 0.25 * diameter_m * diameter_m * length_m;
}

double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }

double watts_to_dbm(double watts) { return 10.0 * std::log10(watts / 1e-3); }

Eigen::VectorXd boltzmann_populations(const Eigen::VectorXd& energies_mhz, double temperature_kelvin) {
  if (!(temperature_kelvin > 0.0)) throw ValidationError("temperature must be > 0 K");
  if (energies_mhz.size() == 0) return {};
  const double ground = energies_mhz.minCoeff();
  const double beta = constants::kelvin_per_mhz / temperature_kelvin;
  Eigen::VectorXd p = (-(energies_mhz.array() - ground) * beta).exp().matrix();
  p /= p.sum();
  return p;
}

Eigen::VectorXd boltzmann_populations(const EnergyLevels& levels, double temperature_kelvin) {
  return boltzmann_populations(levels.values, temperature_kelvin);
}

double ion_count(const EnsembleSpec& spec) {
  spec.validate();
  return spec.host_site_density * spec.dopant_fraction * spec.sample_volume / spec.sites_per_ion_class;
}

double population_difference_count(double n_total, const EnergyLevels& levels, double temperature_kelvin,
                                   int lower, int upper) {
  if (lower < 0 || upper >= levels.size() || lower == upper) {
    throw ValidationError(fmt::format("invalid level pair ({}, {})", lower, upper));
  }
  const Eigen::VectorXd p = boltzmann_populations(levels, temperature_kelvin);
  return n_total * (p[lower] - p[upper]);
}

double single_photon_field(const CavityMode& mode) {
  mode.validate();
  const double f_hz = mode.frequency * 1e6;
  return std::sqrt(constants::vacuum_permeability * constants::planck * f_hz / (2.0 * mode.mode_volume));
}

double single_spin_coupling(double dipole_element, const CavityMode& mode) {
  return mode.filling_factor * dipole_element * single_photon_field(mode);
}

double collective_coupling(double dipole_element, const CavityMode& mode, double population_difference) {
  if (population_difference < 0.0) throw ValidationError("population difference must be >= 0");
  return std::sqrt(population_difference) * single_spin_coupling(dipole_element, mode);
}

double collective_coupling(const Transition& tr, const CavityMode& mode, double population_difference) {
  return collective_coupling(tr.dipole_element, mode, population_difference);
}

double coupling_correction(const CavityMode& mode) { return 4.0 * mode.kappa_ext / mode.linewidth_kappa; }

double photon_number(const CavityMode& mode, double input_power_watts, double coupling_factor) {
  mode.validate();
  if (!(input_power_watts >= 0.0)) throw ValidationError("input power must be >= 0 W");
  const double omega = 2.0 * std::numbers::pi * mode.frequency * 1e6;
  return coupling_factor * input_power_watts * mode.quality_factor() / (constants::hbar * omega * omega);
}

double rabi_frequency(double single_spin_coupling_mhz, double photon_count) {
  if (!(photon_count >= 0.0)) throw ValidationError("photon count must be >= 0");
  return 2.0 * single_spin_coupling_mhz * std::sqrt(photon_count);
}

}  // namespace zfepr
