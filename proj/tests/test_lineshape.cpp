#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "oracles.hpp"
#include "zfepr/errors.hpp"
#include "zfepr/lineshape.hpp"

using namespace zfepr;

namespace {

double peak_density(const LineProfile& p) { return *std::max_element(p.density.begin(), p.density.end()); }

double linf(const LineProfile& a, const LineProfile& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a.density[k] - b.density[k]));
  return d;
}

double profile_sigma(const LineProfile& p) {
  std::vector<double> m1(p.size());
  std::vector<double> m2(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    m1[k] = p.frequencies[k] * p.density[k];
    m2[k] = p.frequencies[k] * p.frequencies[k] * p.density[k];
  }
  const double mean = trapezoid(p.frequencies, m1);
  return std::sqrt(trapezoid(p.frequencies, m2) - mean * mean);
}

LineProfile linear_profile(double slope, double sigma_b, const std::vector<double>& grid, std::uint64_t samples = 1000000) {
  const FieldDistribution d{sigma_b, 1, Vec3::UnitZ()};
  return sample_profile(grid, d, {samples, 3, 1}, [slope](const Vec3& b) { return 100.0 + slope * b.z(); });
}

const FieldDistribution along_z(double sigma) { return FieldDistribution{sigma, 1, Vec3::UnitZ()}; }

}  // namespace

TEST_CASE("zero field spread puts all mass in the centre bin") {
  const auto grid = uniform_grid(9.0, 11.0, 0.01);
  const SpinSystem s = testing::crossing_system();
  for (auto method : {ProfileMethod::exact, ProfileMethod::quadratic}) {
    const auto p = synthesize_profile(s, 0, 3, along_z(0.0), grid, method, {1000, 1, 1});
    const auto nonzero = std::count_if(p.density.begin(), p.density.end(), [](double v) { return v > 0.0; });
    CHECK(nonzero == 1);
    const auto k = static_cast<std::size_t>(std::max_element(p.density.begin(), p.density.end()) - p.density.begin());
    CHECK(p.frequencies[k] == doctest::Approx(10.0));
    CHECK(effective_linewidth(p) <= 2 * 0.01);
  }
  const auto toy = toy_profile(ToyCrossing{10.0, 0.0}, along_z(1e-3), grid, {1000, 1, 1});
  CHECK(peak_density(toy) == doctest::Approx(1.0 / 0.01).epsilon(1e-9));
}

TEST_CASE("linear mapping of a Gaussian field stays Gaussian") {
  const auto grid = uniform_grid(99.0, 101.0, 0.004);
  const auto p = linear_profile(1000.0, 1e-4, grid);  // sigma 0.1 MHz
  CHECK(profile_sigma(p) == doctest::Approx(0.1).epsilon(0.02));
  CHECK(effective_linewidth(p) == doctest::Approx(oracle::gaussian_fwhm(0.1)).epsilon(0.01));
  // slopes need bins of about sigma / 4 to rise above the counting noise
  const auto coarse = linear_profile(1000.0, 1e-4, uniform_grid(99.0, 101.0, 0.025));
  CHECK(asymmetry_index(coarse) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("quadratic edge histogram matches the chi-square law") {
  const SpinSystem s = testing::crossing_system();
  const double sigma = 1e-4;
  const oracle::QuadraticEdge edge{10.0, oracle::crossing_curvature(10.0, 28000.0) * sigma * sigma};
  const double h = 0.02;
  const auto grid = uniform_grid(9.5, 20.0, h);
  const auto p = synthesize_profile(s, 0, 3, along_z(sigma), grid, ProfileMethod::quadratic, {1000000, 5, 1});
  LineProfile expected{grid, std::vector<double>(grid.size())};
  for (std::size_t k = 0; k < grid.size(); ++k) expected.density[k] = edge.bin_average(grid[k] - h / 2, grid[k] + h / 2);
  CHECK(linf(p, expected) <= 0.02 * peak_density(expected));
  for (std::size_t k = 0; k < grid.size() && grid[k] < 9.99; ++k) CHECK(p.density[k] == 0.0);
}

TEST_CASE("edge FWHM agrees with the closed-form half-maximum point") {
  // edge on a bin boundary: the first occupied bin is [f0, f0 + h]
  const double f0 = 10.0;
  const double h = 0.005;
  const double sigma = 1e-4;
  const oracle::QuadraticEdge edge{f0, oracle::crossing_curvature(10.0, 28000.0) * sigma * sigma};
  const auto grid = uniform_grid(f0 - 0.5 * h - 40 * h, 20.0, h);
  const auto p = synthesize_profile(testing::crossing_system(), 0, 3, along_z(sigma), grid, ProfileMethod::quadratic,
                                    {1000000, 9, 1});
  const double top = edge.bin_average(f0, f0 + h);
  const double upper = oracle::bisect([&](double f) { return edge.density(f) - 0.5 * top; }, f0 + 1e-9, f0 + 5.0);
  CHECK(effective_linewidth(p) == doctest::Approx(upper - f0).epsilon(0.02));
}

TEST_CASE("avoided crossing matches its quadratic expansion when the spread is small") {
  const double sigma = 1e-3;
  const ToyCrossing toy{3100.0, 28000.0};
  REQUIRE(toy.slope_mu * sigma / toy.gap_delta < 0.01);
  const auto grid = uniform_grid(3099.9, 3104.0, 0.004);
  const auto exact = toy_profile(toy, along_z(sigma), grid, {1000000, 2, 1});
  const double c = toy.curvature();
  const auto quad = sample_profile(grid, along_z(sigma), {1000000, 2, 1},
                                   [c](const Vec3& b) { return 3100.0 + 0.5 * c * b.z() * b.z(); });
  CHECK(linf(exact, quad) <= 0.02 * peak_density(quad));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (grid[k] + 0.002 <= 3100.0) CHECK(exact.density[k] == 0.0);
  }
}

TEST_CASE("exact and quadratic modes agree on the crossing model") {
  const double sigma = 0.1 * 10.0 / 28000.0;  // mu sigma / Delta = 0.1
  const auto grid = uniform_grid(9.95, 12.0, 0.005);
  const SpinSystem s = testing::crossing_system();
  const auto exact = synthesize_profile(s, 0, 3, along_z(sigma), grid, ProfileMethod::exact, {200000, 4, 1});
  const auto quad = synthesize_profile(s, 0, 3, along_z(sigma), grid, ProfileMethod::quadratic, {200000, 4, 1});
  CHECK(linf(exact, quad) <= 0.05 * peak_density(quad));
}

TEST_CASE("three-dimensional fields use the field magnitude") {
  const ToyCrossing toy{3100.0, 28000.0};
  const FieldDistribution iso{1e-3, 3, Vec3::UnitY()};
  const auto grid = uniform_grid(3099.9, 3106.0, 0.01);
  const auto p = toy_profile(toy, iso, grid, {200000, 6, 1});
  CHECK(p.area() == doctest::Approx(1.0).epsilon(1e-9));
  // chi-square with 3 dof: density vanishes at the edge instead of diverging
  const auto k = static_cast<std::size_t>(std::max_element(p.density.begin(), p.density.end()) - p.density.begin());
  CHECK(p.frequencies[k] > 3100.05);
}

TEST_CASE("quadratic method refuses degenerate zero-field levels") {
  const auto grid = uniform_grid(3000.0, 3200.0, 1.0);
  CHECK_THROWS_WITH_AS(synthesize_profile(testing::isotropic_system(775.0), 0, 8, along_z(1e-4), grid,
                                          ProfileMethod::quadratic, {100, 1, 1}),
                       doctest::Contains("exact"), NumericalError);
}

TEST_CASE("grids that miss the distribution are rejected") {
  const auto grid = uniform_grid(9.9, 10.2, 0.01);
  CHECK_THROWS_AS(synthesize_profile(testing::crossing_system(), 0, 3, along_z(1e-3), grid, ProfileMethod::quadratic,
                                     {10000, 1, 1}),
                  ValidationError);
}

TEST_CASE("profiles are deterministic and independent of the thread count") {
  const auto grid = uniform_grid(9.95, 12.0, 0.005);
  const SpinSystem s = testing::crossing_system();
  const double sigma = 5e-5;
  const auto a = synthesize_profile(s, 0, 3, along_z(sigma), grid, ProfileMethod::exact, {150000, 8, 1});
  const auto b = synthesize_profile(s, 0, 3, along_z(sigma), grid, ProfileMethod::exact, {150000, 8, 3});
  const auto c = synthesize_profile(s, 0, 3, along_z(sigma), grid, ProfileMethod::exact, {150000, 9, 1});
  CHECK(a.density == b.density);
  CHECK(a.density != c.density);
}

TEST_CASE("mixed-system exact profile is normalized and non-negative") {
  const SpinSystem s = testing::mixed_system();
  const auto zero = eigensystem(build_hamiltonian(s, FieldVector{})).values;
  const double f0 = zero[11] - zero[3];
  const auto grid = uniform_grid(f0 - 10.0, f0 + 2.0, 0.01);
  const auto p = synthesize_profile(s, 3, 11, FieldDistribution{1e-4, 3, Vec3::UnitY()}, grid, ProfileMethod::exact,
                                    {20000, 1, 1});
  CHECK(p.area() == doctest::Approx(1.0).epsilon(1e-6));
  for (double v : p.density) CHECK(v >= 0.0);
}

TEST_CASE("asymmetry index") {
  const double sigma = 1e-3;
  const ToyCrossing toy{3100.0, 28000.0};
  // grid point at the edge
  const auto grid = uniform_grid(3099.95, 3104.0, 0.002);
  const auto edge = toy_profile(toy, along_z(sigma), grid, {1000000, 7, 1});
  CHECK(asymmetry_index(edge) > 3.0);
  CHECK(asymmetry_index(mirrored(edge)) == doctest::Approx(1.0 / asymmetry_index(edge)).epsilon(1e-9));
}

TEST_CASE("quadratic edges are narrower than linear lines when c sigma < 2.35 s") {
  const double slope = 1000.0;
  const auto grid = uniform_grid(95.0, 115.0, 0.002);
  for (double sigma : {2e-4, 5e-4, 1e-3}) {
    const double lin = effective_linewidth(linear_profile(slope, sigma, grid, 200000));
    for (double c : {1e5, 1e6, 2.0 * slope / sigma}) {
      if (!(c * sigma < 2.3548 * slope)) continue;
      const auto quad = sample_profile(grid, along_z(sigma), {200000, 3, 1},
                                       [c](const Vec3& b) { return 99.0 + 0.5 * c * b.z() * b.z(); });
      CHECK(effective_linewidth(quad) < lin);
    }
  }
}

TEST_CASE("doublet composition") {
  // noise-free edge profiles from the closed form, so that mode counting is exact
  const auto grid = uniform_grid(3095.0, 3110.0, 0.01);
  const oracle::QuadraticEdge edge{3100.0, 1.0};
  LineProfile low{grid, std::vector<double>(grid.size())};
  for (std::size_t k = 0; k < grid.size(); ++k) low.density[k] = edge.bin_average(grid[k] - 0.005, grid[k] + 0.005);
  const double area = low.area();
  for (double& v : low.density) v /= area;
  // mirrored about 3102.5: edge at 3105, tail running down towards the first edge
  const auto high = mirrored(low);
  const auto alone = compose_doublet(low, high, 1.0, 0.0);
  for (std::size_t k = 0; k < alone.size(); ++k) CHECK(alone.density[k] == doctest::Approx(low.density[k]).epsilon(1e-12));
  const auto ab = compose_doublet(low, high, 0.3, 0.7);
  const auto ba = compose_doublet(high, low, 0.7, 0.3);
  for (std::size_t k = 0; k < ab.size(); ++k) CHECK(ab.density[k] == doctest::Approx(ba.density[k]).epsilon(1e-12));
  CHECK(ab.area() == doctest::Approx(1.0).epsilon(1e-9));
  REQUIRE(effective_linewidth(low) < 5.0);
  CHECK(count_local_maxima(ab) == 2);
  CHECK(count_local_maxima(low) == 1);
  CHECK_THROWS_AS(compose_doublet(low, high, 0.0, 0.0), ValidationError);
}
