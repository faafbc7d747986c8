#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace zfepr {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Effective electron spin S coupled to nuclear spin I for one crystallographic site.
///
/// All tensors are expressed in the crystal frame (D1, D2, b) mapped onto (x, y, z).
/// A and Q are in MHz; g and g_n are dimensionless.
struct SpinSystem {
  int electron_multiplicity = 2;  // 2S + 1
  int nuclear_multiplicity = 8;   // 2I + 1
  Mat3 g = Mat3::Zero();
  Mat3 A = Mat3::Zero();
  Mat3 Q = Mat3::Zero();
  double g_n = 0.0;
  std::string site_label = "site1";

  [[nodiscard]] int dimension() const { return electron_multiplicity * nuclear_multiplicity; }

  /// Throws ValidationError naming the offending field.
  void validate() const;
};

/// Static field in tesla, crystal frame (D1, D2, b).
struct FieldVector {
  Vec3 components = Vec3::Zero();

  static FieldVector along(const Vec3& direction, double magnitude) {
    return FieldVector{direction * magnitude};
  }
};

struct EnergyLevels {
  Eigen::VectorXd values;  // MHz, ascending
  CMatrix vectors;         // columns are eigenvectors

  [[nodiscard]] int size() const { return static_cast<int>(values.size()); }
};

struct Transition {
  int lower_index = 0;
  int upper_index = 0;
  double frequency = 0.0;              // MHz
  double dipole_element = 0.0;         // MHz / T
  double population_difference = 0.0; // p_lower - p_upper
  double weighted_strength = 0.0;      // dipole_element * sqrt(|population_difference|)
};

/// Frequency interval [lo, hi] in MHz.
struct FrequencyWindow {
  double lo = 0.0;
  double hi = 0.0;

  [[nodiscard]] bool contains(double f) const { return f >= lo && f <= hi; }
  [[nodiscard]] double width() const { return hi - lo; }
};

/// Spin operator matrices (x, y, z) for multiplicity 2j+1, basis ordered m = j, j-1, ..., -j.
std::array<CMatrix, 3> angular_momentum_matrices(int multiplicity);

/// Hamiltonian H(B) = H0 + sum_k B_k M_k, with the zero-field part and the three
/// Cartesian moment operators precomputed once per system.
class SpinHamiltonian {
 public:
  explicit SpinHamiltonian(const SpinSystem& sys);

  [[nodiscard]] const SpinSystem& system() const { return sys_; }
  [[nodiscard]] int dimension() const { return sys_.dimension(); }

  [[nodiscard]] const CMatrix& zero_field() const { return h0_; }
  [[nodiscard]] CMatrix at(const FieldVector& field) const;

  /// dH/d|B| along the unit vector n, in MHz/T.
  [[nodiscard]] CMatrix moment(const Vec3& n) const;

 private:
  SpinSystem sys_;
  CMatrix h0_;
  std::array<CMatrix, 3> moment_axes_;
};

CMatrix build_hamiltonian(const SpinSystem& sys, const FieldVector& field);

/// Diagonalizes a Hermitian matrix. Eigenvectors carry a fixed phase: the first
/// component with non-negligible magnitude is real and positive.
EnergyLevels eigensystem(const CMatrix& H);

CMatrix magnetic_moment_operator(const SpinSystem& sys, const Vec3& n);

/// Groups levels whose energies differ by less than `tolerance` MHz.
/// Returns, for each level, the index of its cluster; clusters are numbered in ascending order.
std::vector<int> degenerate_clusters(const Eigen::VectorXd& values, double tolerance);

/// Squared transition moments |<j|M|i>|^2, averaged over degenerate partners so that
/// the sum over any cluster-to-cluster block is basis independent.
Eigen::MatrixXd transition_moments_squared(const EnergyLevels& levels, const CMatrix& moment,
                                           double degeneracy_tolerance = 1e-6);

std::vector<Transition> enumerate_transitions(const EnergyLevels& levels, const SpinSystem& sys,
                                              const Vec3& n, double temperature_kelvin,
                                              std::optional<FrequencyWindow> window = std::nullopt);

/// Index of pair (lower, upper), lower < upper, in the row-major enumeration of a
/// dimension-d system: (0,1), (0,2), ..., (0,d-1), (1,2), ...
int pair_index(int lower, int upper, int dimension);
std::pair<int, int> pair_from_index(int index, int dimension);

struct ZeemanScan {
  std::vector<double> fields;                // tesla, as supplied
  std::vector<Eigen::VectorXd> levels;       // per field point, in tracked order
  std::vector<bool> tracking_warning;        // per segment (k-1, k); entry 0 is always false

  /// Tracked frequency |E_upper - E_lower| along the scan. Labels refer to the
  /// ascending order at the first field point.
  [[nodiscard]] std::vector<double> transition_curve(int lower, int upper) const;
  [[nodiscard]] bool any_warning() const;
};

/// Levels versus field magnitude along n, tracked by eigenvector overlap.
/// A segment is flagged when any tracked state keeps less than 0.5 overlap.
ZeemanScan zeeman_scan(const SpinSystem& sys, const Vec3& n, const std::vector<double>& field_values);

/// d^2 f / dB^2 at zero field for the (lower, upper) transition along n, MHz/T^2.
double transition_curvature(const SpinSystem& sys, const Vec3& n, int lower, int upper);

/// Rotates every tensor of the system: T -> R T R^T.
SpinSystem rotated(const SpinSystem& sys, const Mat3& rotation);

}  // namespace zfepr
