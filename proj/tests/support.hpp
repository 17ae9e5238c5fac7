#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "syssamp/syssamp.hpp"

namespace testing {

// Published forest-strip moments with the intraclass value used throughout.
inline syssamp::PopulationMoments forest_moments(double intra = 0.871) {
  syssamp::PopulationMoments m;
  m.N = 176;
  m.n = 16;
  m.k = 11;
  m.mean_y = 282.6136;
  m.mean_x = 6.9943;
  m.s2_y = 24114.67;
  m.s2_x = 8.76;
  m.rho = 0.871;
  m.rho_y_intra = intra;
  m.rho_x_intra = intra;
  m.s2_y2 = 18086.0025;
  return m;
}

inline syssamp::Population toy_population() {
  syssamp::Population p;
  p.y = {1, 2, 3, 4};
  p.x = {2, 4, 6, 8};
  return p;
}

inline double rel_diff(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

// Random valid moment set with both intraclass values positive. Relative
// variances theta*c^2 stay below 0.5, where the first-order forms are still
// meaningful (the forest moments sit near 0.26).
inline syssamp::PopulationMoments random_moments(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  while (true) {
    syssamp::PopulationMoments m;
    const std::size_t n = 4 + static_cast<std::size_t>(u(rng) * 20);
    const std::size_t k = 3 + static_cast<std::size_t>(u(rng) * 20);
    m.n = n;
    m.k = k;
    m.N = n * k;
    m.mean_y = 10.0 + 500.0 * u(rng);
    m.mean_x = 1.0 + 50.0 * u(rng);
    m.s2_y = std::pow(m.mean_y * (0.05 + 0.6 * u(rng)), 2);
    m.s2_x = std::pow(m.mean_x * (0.05 + 0.6 * u(rng)), 2);
    m.rho = -0.95 + 1.9 * u(rng);
    m.rho_y_intra = 0.9 * u(rng);
    m.rho_x_intra = 0.9 * u(rng);
    m.s2_y2 = m.s2_y * (0.2 + 0.8 * u(rng));
    const auto d = syssamp::derive_coefficients(m);
    if (d.theta * d.c0 * d.c0 < 0.5 && d.theta * d.c1 * d.c1 < 0.5) return m;
  }
}

inline std::string temp_path(const std::string& name) {
  return std::string(SYSSAMP_TEST_TMP) + "/" + name;
}

}  // namespace testing
