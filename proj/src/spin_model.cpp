#include "zfepr/spin_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include <fmt/format.h>

#include "zfepr/constants.hpp"
#include "zfepr/errors.hpp"
#include "zfepr/thermal.hpp"

namespace zfepr {
namespace {

double max_abs(const Mat3& m) { return m.cwiseAbs().maxCoeff(); }

void require_symmetric(const Mat3& m, const char* name) {
  if (!m.allFinite()) throw ValidationError(fmt::format("{}: non-finite entry", name));
  const double scale = max_abs(m);
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale) {
    throw ValidationError(fmt::format("{}: matrix is not symmetric (max |M - M^T| = {:.3g})", name, asym));
  }
}

void require_unit(const Vec3& n) {
  if (!n.allFinite() || std::abs(n.norm() - 1.0) > 1e-9) {
    throw ValidationError(fmt::format("direction must be a unit vector (|n| = {:.12g})", n.norm()));
  }
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

double max_abs(const CMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace

void SpinSystem::validate() const {
  if (electron_multiplicity < 2) throw ValidationError("electron_multiplicity must be >= 2");
  if (nuclear_multiplicity < 1) throw ValidationError("nuclear_multiplicity must be >= 1");
  if (!g.allFinite()) throw ValidationError("g: non-finite entry");
  require_symmetric(A, "A");
  require_symmetric(Q, "Q");
  if (!std::isfinite(g_n)) throw ValidationError("g_n: non-finite");
}

std::array<CMatrix, 3> angular_momentum_matrices(int multiplicity) {
  if (multiplicity < 1) throw ValidationError("multiplicity must be >= 1");
  const int d = multiplicity;
  const double j = 0.5 * (d - 1);
  CMatrix jp = CMatrix::Zero(d, d);
  CMatrix jz = CMatrix::Zero(d, d);
  for (int k = 0; k < d; ++k) {
    const double m = j - k;
    jz(k, k) = m;
    if (k + 1 < d) {
      const double mlow = m - 1.0;
      jp(k, k + 1) = std::sqrt(j * (j + 1.0) - mlow * (mlow + 1.0));
    }
  }
  const CMatrix jm = jp.adjoint();
  const std::complex<double> half_i(0.0, 0.5);
  return {0.5 * (jp + jm), -half_i * (jp - jm), jz};
}

SpinHamiltonian::SpinHamiltonian(const SpinSystem& sys) : sys_(sys) {
  sys_.validate();
  const auto se = angular_momentum_matrices(sys_.electron_multiplicity);
  const auto in = angular_momentum_matrices(sys_.nuclear_multiplicity);
  const CMatrix id_e = CMatrix::Identity(sys_.electron_multiplicity, sys_.electron_multiplicity);
  const CMatrix id_n = CMatrix::Identity(sys_.nuclear_multiplicity, sys_.nuclear_multiplicity);

  std::array<CMatrix, 3> s, i;
  for (int a = 0; a < 3; ++a) {
    s[a] = kron(se[a], id_n);
    i[a] = kron(id_e, in[a]);
  }

  const int d = sys_.dimension();
  h0_ = CMatrix::Zero(d, d);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      if (sys_.A(a, b) != 0.0) h0_ += sys_.A(a, b) * (s[a] * i[b]);
      if (sys_.Q(a, b) != 0.0) h0_ += sys_.Q(a, b) * (i[a] * i[b]);
    }
  }
  h0_ = 0.5 * (h0_ + h0_.adjoint()).eval();

  using constants::bohr_magneton_mhz_per_tesla;
  using constants::nuclear_magneton_mhz_per_tesla;
  for (int a = 0; a < 3; ++a) {
    CMatrix m = CMatrix::Zero(d, d);
    for (int b = 0; b < 3; ++b) {
      if (sys_.g(a, b) != 0.0) m += bohr_magneton_mhz_per_tesla * sys_.g(a, b) * s[b];
    }
    m -= nuclear_magneton_mhz_per_tesla * sys_.g_n * i[a];
    moment_axes_[a] = std::move(m);
  }
}

CMatrix SpinHamiltonian::at(const FieldVector& field) const {
  if (!field.components.allFinite()) throw ValidationError("field: non-finite component");
  CMatrix h = h0_;
  for (int a = 0; a < 3; ++a) {
    if (field.components[a] != 0.0) h += field.components[a] * moment_axes_[a];
  }
  return h;
}

CMatrix SpinHamiltonian::moment(const Vec3& n) const {
  require_unit(n);
  CMatrix m = CMatrix::Zero(dimension(), dimension());
  for (int a = 0; a < 3; ++a) {
    if (n[a] != 0.0) m += n[a] * moment_axes_[a];
  }
  return m;
}

CMatrix build_hamiltonian(const SpinSystem& sys, const FieldVector& field) {
  return SpinHamiltonian(sys).at(field);
}

CMatrix magnetic_moment_operator(const SpinSystem& sys, const Vec3& n) {
  return SpinHamiltonian(sys).moment(n);
}

EnergyLevels eigensystem(const CMatrix& H) {
  if (H.rows() != H.cols() || H.rows() == 0) throw ValidationError("eigensystem: matrix must be square and non-empty");
  const double scale = std::max(1.0, max_abs(H));
  const double herm = max_abs(CMatrix(H - H.adjoint()));
  if (!std::isfinite(herm) || herm > 1e-10 * scale) {
    throw ValidationError(fmt::format("eigensystem: matrix is not Hermitian (max |H - H^+| = {:.3g})", herm));
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(H);
  if (solver.info() != Eigen::Success) throw NumericalError("eigensystem: diagonalization failed");

  EnergyLevels out{solver.eigenvalues(), solver.eigenvectors()};
  for (Eigen::Index c = 0; c < out.vectors.cols(); ++c) {
    auto col = out.vectors.col(c);
    for (Eigen::Index r = 0; r < col.size(); ++r) {
      const double mag = std::abs(col[r]);
      if (mag > 1e-10) {
        col *= std::conj(col[r]) / mag;
        col[r] = mag;
        break;
      }
    }
  }
  return out;
}

std::vector<int> degenerate_clusters(const Eigen::VectorXd& values, double tolerance) {
  std::vector<int> cluster(values.size(), 0);
  int current = 0;
  for (Eigen::Index k = 1; k < values.size(); ++k) {
    if (values[k] - values[k - 1] >= tolerance) ++current;
    cluster[k] = current;
  }
  return cluster;
}

Eigen::MatrixXd transition_moments_squared(const EnergyLevels& levels, const CMatrix& moment,
                                           double degeneracy_tolerance) {
  const int d = levels.size();
  const CMatrix mv = levels.vectors.adjoint() * moment * levels.vectors;
  const Eigen::MatrixXd raw = mv.cwiseAbs2();

  const auto cluster = degenerate_clusters(levels.values, degeneracy_tolerance);
  const int nclusters = d == 0 ? 0 : cluster.back() + 1;
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(nclusters, nclusters);
  std::vector<int> count(nclusters, 0);
  for (int a = 0; a < d; ++a) {
    ++count[cluster[a]];
    for (int b = 0; b < d; ++b) block(cluster[a], cluster[b]) += raw(a, b);
  }
  Eigen::MatrixXd out(d, d);
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      out(a, b) = block(cluster[a], cluster[b]) / (count[cluster[a]] * count[cluster[b]]);
    }
  }
  return out;
}

int pair_index(int lower, int upper, int dimension) {
  if (lower < 0 || upper <= lower || upper >= dimension) {
    throw ValidationError(fmt::format("invalid level pair ({}, {}) for dimension {}", lower, upper, dimension));
  }
  return lower * dimension - lower * (lower + 1) / 2 + (upper - lower - 1);
}

std::pair<int, int> pair_from_index(int index, int dimension) {
  int remaining = index;
  for (int lower = 0; lower < dimension - 1; ++lower) {
    const int row = dimension - 1 - lower;
    if (remaining < row) return {lower, lower + 1 + remaining};
    remaining -= row;
  }
  throw ValidationError(fmt::format("transition index {} out of range for dimension {}", index, dimension));
}

std::vector<Transition> enumerate_transitions(const EnergyLevels& levels, const SpinSystem& sys,
                                              const Vec3& n, double temperature_kelvin,
                                              std::optional<FrequencyWindow> window) {
  if (!(temperature_kelvin > 0.0)) throw ValidationError("temperature_kelvin must be > 0");
  const CMatrix moment = SpinHamiltonian(sys).moment(n);
  const Eigen::MatrixXd m2 = transition_moments_squared(levels, moment);
  const Eigen::VectorXd pop = boltzmann_populations(levels.values, temperature_kelvin);

  std::vector<Transition> out;
  const int d = levels.size();
  out.reserve(static_cast<std::size_t>(d * (d - 1) / 2));
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      Transition t;
      t.lower_index = i;
      t.upper_index = j;
      t.frequency = std::max(0.0, levels.values[j] - levels.values[i]);
      if (window && !window->contains(t.frequency)) continue;
      t.dipole_element = std::sqrt(m2(j, i));
      t.population_difference = pop[i] - pop[j];
      t.weighted_strength = t.dipole_element * std::sqrt(std::abs(t.population_difference));
      out.push_back(t);
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Transition& a, const Transition& b) { return a.frequency < b.frequency; });
  return out;
}

std::vector<double> ZeemanScan::transition_curve(int lower, int upper) const {
  std::vector<double> curve;
  curve.reserve(levels.size());
  for (const auto& v : levels) {
    if (lower < 0 || upper < 0 || lower >= v.size() || upper >= v.size()) {
      throw ValidationError("transition_curve: level index out of range");
    }
    curve.push_back(std::abs(v[upper] - v[lower]));
  }
  return curve;
}

bool ZeemanScan::any_warning() const {
  return std::any_of(tracking_warning.begin(), tracking_warning.end(), [](bool w) { return w; });
}

ZeemanScan zeeman_scan(const SpinSystem& sys, const Vec3& n, const std::vector<double>& field_values) {
  require_unit(n);
  const SpinHamiltonian ham(sys);
  const int d = ham.dimension();

  ZeemanScan scan;
  scan.fields = field_values;
  CMatrix tracked_vectors;
  for (std::size_t k = 0; k < field_values.size(); ++k) {
    if (!std::isfinite(field_values[k])) throw ValidationError("zeeman_scan: non-finite field value");
    const EnergyLevels lv = eigensystem(ham.at(FieldVector::along(n, field_values[k])));
    if (k == 0) {
      scan.levels.push_back(lv.values);
      scan.tracking_warning.push_back(false);
      tracked_vectors = lv.vectors;
      continue;
    }
    const Eigen::MatrixXd overlap = (tracked_vectors.adjoint() * lv.vectors).cwiseAbs();
    std::vector<std::tuple<double, int, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(d * d));
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) pairs.emplace_back(overlap(a, b), a, b);
    }
    std::sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) {
      if (std::get<0>(x) != std::get<0>(y)) return std::get<0>(x) > std::get<0>(y);
      if (std::get<1>(x) != std::get<1>(y)) return std::get<1>(x) < std::get<1>(y);
      return std::get<2>(x) < std::get<2>(y);
    });
    std::vector<int> assign(d, -1);
    std::vector<bool> taken(d, false);
    double weakest = 1.0;
    int assigned = 0;
    for (const auto& [ov, a, b] : pairs) {
      if (assign[a] >= 0 || taken[b]) continue;
      assign[a] = b;
      taken[b] = true;
      weakest = std::min(weakest, ov);
      if (++assigned == d) break;
    }
    Eigen::VectorXd values(d);
    CMatrix vectors(d, d);
    for (int a = 0; a < d; ++a) {
      values[a] = lv.values[assign[a]];
      vectors.col(a) = lv.vectors.col(assign[a]);
    }
    scan.levels.push_back(std::move(values));
    scan.tracking_warning.push_back(weakest < 0.5);
    tracked_vectors = std::move(vectors);
  }
  return scan;
}

double transition_curvature(const SpinSystem& sys, const Vec3& n, int lower, int upper) {
  require_unit(n);
  const SpinHamiltonian ham(sys);
  const int d = ham.dimension();
  if (lower < 0 || upper >= d || lower >= upper) {
    throw ValidationError(fmt::format("transition_curvature: invalid level pair ({}, {})", lower, upper));
  }
  const Eigen::VectorXd zero = eigensystem(ham.zero_field()).values;
  for (int level : {lower, upper}) {
    const double below = level > 0 ? zero[level] - zero[level - 1] : std::numeric_limits<double>::infinity();
    const double above = level + 1 < d ? zero[level + 1] - zero[level] : std::numeric_limits<double>::infinity();
    if (std::min(below, above) < 1e-3) {
      throw NumericalError(fmt::format(
          "transition_curvature: level {} is degenerate at zero field (gap {:.3g} MHz); "
          "curvature is undefined without degenerate perturbation theory",
          level, std::min(below, above)));
    }
  }

  const double scale = zero.cwiseAbs().maxCoeff() + 1.0;
  auto frequency = [&](double b) {
    const Eigen::VectorXd v = Eigen::SelfAdjointEigenSolver<CMatrix>(ham.at(FieldVector::along(n, b)),
                                                                     Eigen::EigenvaluesOnly)
                                  .eigenvalues();
    return v[upper] - v[lower];
  };
  const double f0 = zero[upper] - zero[lower];
  auto second_difference = [&](double h) { return (frequency(h) - 2.0 * f0 + frequency(-h)) / (h * h); };

  double h = 1e-4;
  double previous = second_difference(h);
  for (int k = 0; k < 30; ++k) {
    h *= 0.5;
    const double estimate = second_difference(h);
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * scale / (h * h);
    if (std::abs(estimate - previous) <= 0.01 * std::abs(estimate) + noise) return estimate;
    previous = estimate;
  }
  throw NumericalError("transition_curvature: step refinement did not converge");
}

SpinSystem rotated(const SpinSystem& sys, const Mat3& rotation) {
  SpinSystem out = sys;
  out.g = rotation * sys.g * rotation.transpose();
  out.A = rotation * sys.A * rotation.transpose();
  out.Q = rotation * sys.Q * rotation.transpose();
  return out;
}

}  // namespace zfepr
