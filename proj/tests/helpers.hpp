#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "zfepr/spin_model.hpp"

namespace testing {

inline zfepr::SpinSystem isotropic_system(double a) {
  zfepr::SpinSystem s;
  s.g = zfepr::Mat3::Identity() * 2.0;
  s.A = zfepr::Mat3::Identity() * a;
  return s;
}

// Er-like synthetic site: anisotropic g, rotated A and Q, all zero-field gaps well above 1e-3 MHz.
inline zfepr::SpinSystem mixed_system() {
  zfepr::SpinSystem s;
  s.site_label = "mixed";
  s.g << 3.0, -2.9, -3.5, -2.9, 8.9, 5.6, -3.5, 5.6, 5.1;
  s.A << 907.642, 83.336, 405.426, 83.336, 492.505, 235.812, 405.426, 235.812, 749.852;
  s.Q << 2.907, -2.833, 3.499, -2.833, -1.598, 5.863, 3.499, 5.863, -1.308;
  s.g_n = -0.1618;
  return s;
}

// S = 1/2, I = 1/2 with A = diag(12, 8, 0): zero-field levels -5, -1, 1, 5 MHz and an
// avoided crossing f = sqrt(10^2 + (28000 B)^2) between levels 0 and 3 along z.
inline zfepr::SpinSystem crossing_system() {
  zfepr::SpinSystem s;
  s.site_label = "toy";
  s.nuclear_multiplicity = 2;
  s.A = zfepr::Vec3(12.0, 8.0, 0.0).asDiagonal();
  s.g = zfepr::Mat3::Identity() * (28000.0 / 13996.2449);
  return s;
}

inline zfepr::Mat3 rotation(double alpha, double beta, double gamma) {
  using Eigen::AngleAxisd;
  return (AngleAxisd(alpha, zfepr::Vec3::UnitZ()) * AngleAxisd(beta, zfepr::Vec3::UnitY()) *
          AngleAxisd(gamma, zfepr::Vec3::UnitZ()))
      .toRotationMatrix();
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("zfepr_tests_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
