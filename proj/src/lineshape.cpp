#include "zfepr/lineshape.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "zfepr/errors.hpp"

namespace zfepr {
namespace {

constexpr std::uint64_t kBlockSize = 1u << 16;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double grid_step(const std::vector<double>& grid) {
  if (grid.size() < 2) throw ValidationError("profile grid needs at least two points");
  const double step = (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1);
  if (!(step > 0.0)) throw ValidationError("profile grid must be ascending");
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (std::abs(grid[k] - grid[k - 1] - step) > 1e-6 * step) {
      throw ValidationError("profile grid must be uniformly spaced");
    }
  }
  return step;
}

}  // namespace

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  double sum = 0.0;
  for (std::size_t k = 1; k < x.size() && k < y.size(); ++k) sum += 0.5 * (x[k] - x[k - 1]) * (y[k] + y[k - 1]);
  return sum;
}

double LineProfile::area() const { return trapezoid(frequencies, density); }

void LineProfile::validate(double tolerance) const {
  if (frequencies.size() != density.size() || frequencies.size() < 2) {
    throw ValidationError("line profile: frequency and density columns must match and have >= 2 rows");
  }
  for (std::size_t k = 0; k < density.size(); ++k) {
    if (!(density[k] >= 0.0) || !std::isfinite(density[k])) {
      throw ValidationError(fmt::format("line profile: density must be finite and >= 0 (row {})", k));
    }
    if (k > 0 && !(frequencies[k] > frequencies[k - 1])) {
      throw ValidationError("line profile: frequencies must be strictly ascending");
    }
  }
  const double a = area();
  if (std::abs(a - 1.0) > tolerance) {
    throw ValidationError(fmt::format("line profile is not normalized (area = {:.9g})", a));
  }
}

void FieldDistribution::validate() const {
  if (!(sigma_b >= 0.0) || !std::isfinite(sigma_b)) throw ValidationError("sigma_b must be finite and >= 0");
  if (dimensionality != 1 && dimensionality != 3) throw ValidationError("dimensionality must be 1 or 3");
  if (std::abs(axis.norm() - 1.0) > 1e-9) throw ValidationError("field distribution axis must be a unit vector");
}

double ToyCrossing::frequency(double field) const {
  const double z = slope_mu * field;
  return std::sqrt(gap_delta * gap_delta + z * z);
}

std::vector<double> uniform_grid(double start, double stop, double step) {
  if (!(step > 0.0) || !(stop > start)) throw ValidationError("grid requires stop > start and step > 0");
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 0.5)) + 1;
  std::vector<double> grid(n);
  for (std::size_t k = 0; k < n; ++k) grid[k] = start + static_cast<double>(k) * step;
  return grid;
}

LineProfile sample_profile(const std::vector<double>& grid, const FieldDistribution& dist,
                           const SamplingOptions& options, const std::function<double(const Vec3&)>& mapping) {
  dist.validate();
  if (options.samples == 0) throw ValidationError("sample count must be > 0");
  const double step = grid_step(grid);
  const double lower_edge = grid.front() - 0.5 * step;
  const std::size_t nbins = grid.size();
  const std::uint64_t nblocks = (options.samples + kBlockSize - 1) / kBlockSize;

  auto run_blocks = [&](unsigned worker, unsigned workers, std::vector<std::uint64_t>& counts,
                        std::uint64_t& outside) {
    for (std::uint64_t b = worker; b < nblocks; b += workers) {
      std::mt19937_64 rng(splitmix64(options.seed ^ splitmix64(b)));
      std::normal_distribution<double> normal(0.0, 1.0);
      const std::uint64_t begin = b * kBlockSize;
      const std::uint64_t end = std::min(options.samples, begin + kBlockSize);
      for (std::uint64_t s = begin; s < end; ++s) {
        Vec3 field;
        if (dist.dimensionality == 1) {
          field = dist.axis * (dist.sigma_b * normal(rng));
        } else {
          const double x = normal(rng);
          const double y = normal(rng);
          const double z = normal(rng);
          field = Vec3(x, y, z) * dist.sigma_b;
        }
        const double f = mapping(field);
        const double pos = std::floor((f - lower_edge) / step);
        if (!(pos >= 0.0) || pos >= static_cast<double>(nbins)) {
          ++outside;
        } else {
          ++counts[static_cast<std::size_t>(pos)];
        }
      }
    }
  };

  const unsigned workers =
      static_cast<unsigned>(std::clamp<std::uint64_t>(static_cast<std::uint64_t>(std::max(1, options.threads)), 1, nblocks));
  std::vector<std::vector<std::uint64_t>> counts(workers, std::vector<std::uint64_t>(nbins, 0));
  std::vector<std::uint64_t> outside(workers, 0);
  if (workers == 1) {
    run_blocks(0, 1, counts[0], outside[0]);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back(run_blocks, w, workers, std::ref(counts[w]), std::ref(outside[w]));
    }
    for (auto& t : pool) t.join();
  }

  std::vector<std::uint64_t> total(nbins, 0);
  std::uint64_t total_outside = 0;
  for (unsigned w = 0; w < workers; ++w) {
    for (std::size_t k = 0; k < nbins; ++k) total[k] += counts[w][k];
    total_outside += outside[w];
  }
  const double outside_fraction = static_cast<double>(total_outside) / static_cast<double>(options.samples);
  if (outside_fraction > 1e-3) {
    throw ValidationError(fmt::format(
        "profile grid [{}, {}] MHz misses {:.3g}% of the sampled probability mass", grid.front(), grid.back(),
        100.0 * outside_fraction));
  }

  LineProfile profile{grid, std::vector<double>(nbins)};
  const double norm = 1.0 / (static_cast<double>(options.samples - total_outside) * step);
  for (std::size_t k = 0; k < nbins; ++k) profile.density[k] = static_cast<double>(total[k]) * norm;
  const double area = profile.area();
  if (area > 0.0) {
    for (double& v : profile.density) v /= area;
  }
  return profile;
}

LineProfile synthesize_profile(const SpinSystem& sys, int lower, int upper, const FieldDistribution& dist,
                               const std::vector<double>& grid, ProfileMethod method,
                               const SamplingOptions& options) {
  dist.validate();
  const SpinHamiltonian ham(sys);
  if (lower < 0 || upper >= ham.dimension() || lower >= upper) {
    throw ValidationError(fmt::format("synthesize_profile: invalid level pair ({}, {})", lower, upper));
  }
  const EnergyLevels zero = eigensystem(ham.zero_field());
  const double f0 = zero.values[upper] - zero.values[lower];

  if (method == ProfileMethod::quadratic) {
    Vec3 curvature = Vec3::Zero();
    try {
      if (dist.dimensionality == 1) {
        curvature[0] = transition_curvature(sys, dist.axis, lower, upper);
      } else {
        for (int a = 0; a < 3; ++a) curvature[a] = transition_curvature(sys, Vec3::Unit(a), lower, upper);
      }
    } catch (const NumericalError& e) {
      throw NumericalError(fmt::format("{}; use the exact method for this transition", e.what()));
    }
    if (dist.dimensionality == 1) {
      const Vec3 axis = dist.axis;
      const double c = curvature[0];
      return sample_profile(grid, dist, options, [f0, c, axis](const Vec3& b) {
        const double bn = axis.dot(b);
        return f0 + 0.5 * c * bn * bn;
      });
    }
    return sample_profile(grid, dist, options, [f0, curvature](const Vec3& b) {
      return f0 + 0.5 * (curvature.array() * b.array().square()).sum();
    });
  }

  const CVector ref_lower = zero.vectors.col(lower);
  const CVector ref_upper = zero.vectors.col(upper);
  return sample_profile(grid, dist, options, [&ham, &ref_lower, &ref_upper](const Vec3& b) {
    const Eigen::SelfAdjointEigenSolver<CMatrix> solver(ham.at(FieldVector{b}));
    const Eigen::VectorXd lo = (ref_lower.adjoint() * solver.eigenvectors()).cwiseAbs().transpose();
    const Eigen::VectorXd up = (ref_upper.adjoint() * solver.eigenvectors()).cwiseAbs().transpose();
    Eigen::Index il = 0;
    Eigen::Index iu = 0;
    lo.maxCoeff(&il);
    up.maxCoeff(&iu);
    return solver.eigenvalues()[iu] - solver.eigenvalues()[il];
  });
}

LineProfile toy_profile(const ToyCrossing& toy, const FieldDistribution& dist, const std::vector<double>& grid,
                        const SamplingOptions& options) {
  if (!(toy.gap_delta > 0.0)) throw ValidationError("toy crossing gap must be > 0");
  if (dist.dimensionality == 1) {
    const Vec3 axis = dist.axis;
    return sample_profile(grid, dist, options, [toy, axis](const Vec3& b) { return toy.frequency(axis.dot(b)); });
  }
  return sample_profile(grid, dist, options, [toy](const Vec3& b) { return toy.frequency(b.norm()); });
}

double effective_linewidth(const LineProfile& profile) {
  profile.validate(1e-3);
  const auto& f = profile.frequencies;
  const auto& p = profile.density;
  const auto mode = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  const double half = 0.5 * p[mode];

  std::size_t k = mode;
  while (k > 0 && p[k - 1] >= half) --k;
  if (k == 0) throw NumericalError("effective_linewidth: lower half maximum not bracketed by the grid");
  const double lower = p[k - 1] == 0.0
                           ? 0.5 * (f[k - 1] + f[k])
                           : f[k - 1] + (half - p[k - 1]) / (p[k] - p[k - 1]) * (f[k] - f[k - 1]);

  k = mode;
  while (k + 1 < p.size() && p[k + 1] >= half) ++k;
  if (k + 1 == p.size()) throw NumericalError("effective_linewidth: upper half maximum not bracketed by the grid");
  const double upper = p[k + 1] == 0.0
                           ? 0.5 * (f[k] + f[k + 1])
                           : f[k] + (p[k] - half) / (p[k] - p[k + 1]) * (f[k + 1] - f[k]);
  return upper - lower;
}

double asymmetry_index(const LineProfile& profile) {
  profile.validate(1e-3);
  const auto& f = profile.frequencies;
  const auto& p = profile.density;
  const std::size_t n = p.size();
  if (n < 3) throw ValidationError("asymmetry_index: profile too short");
  const auto mode = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());

  double left = 0.0;
  double right = 0.0;
  // Neighbour differences; every interval lies wholly on one side of the mode.
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double slope = std::abs((p[i + 1] - p[i]) / (f[i + 1] - f[i]));
    if (i + 1 <= mode) left = std::max(left, slope);
    if (i >= mode) right = std::max(right, slope);
  }
  if (!(right > 0.0)) throw NumericalError("asymmetry_index: flat upper side");
  return left / right;
}

LineProfile compose_doublet(const LineProfile& p1, const LineProfile& p2, double w1, double w2) {
  if (p1.frequencies != p2.frequencies) throw ValidationError("compose_doublet: profiles must share a grid");
  if (!(w1 >= 0.0 && w2 >= 0.0 && w1 + w2 > 0.0)) throw ValidationError("compose_doublet: weights must be >= 0 with positive sum");
  LineProfile out{p1.frequencies, std::vector<double>(p1.size())};
  const double total = w1 + w2;
  for (std::size_t k = 0; k < out.size(); ++k) out.density[k] = (w1 * p1.density[k] + w2 * p2.density[k]) / total;
  const double area = out.area();
  if (area > 0.0) {
    for (double& v : out.density) v /= area;
  }
  return out;
}

LineProfile mirrored(const LineProfile& profile) {
  LineProfile out;
  const std::size_t n = profile.size();
  out.frequencies.resize(n);
  out.density.resize(n);
  const double sum = profile.frequencies.front() + profile.frequencies.back();
  for (std::size_t k = 0; k < n; ++k) {
    out.frequencies[k] = sum - profile.frequencies[n - 1 - k];
    out.density[k] = profile.density[n - 1 - k];
  }
  return out;
}

int count_local_maxima(const LineProfile& profile, double floor_fraction) {
  const auto& p = profile.density;
  if (p.size() < 3) return 0;
  const double floor = floor_fraction * *std::max_element(p.begin(), p.end());
  int count = 0;
  std::size_t i = 1;
  while (i + 1 < p.size()) {
    // walk across plateaus so that a flat top counts once
    std::size_t j = i;
    while (j + 1 < p.size() && p[j + 1] == p[i]) ++j;
    if (j + 1 < p.size() && p[i] > p[i - 1] && p[i] > p[j + 1] && p[i] > floor) ++count;
    i = j + 1;
  }
  return count;
}

}  // namespace zfepr
