#pragma once

#include <cmath>
#include <random>

#include "saddlelab/linalg.hpp"
#include "saddlelab/random.hpp"

namespace saddlelab {

inline Vector sample_unit_sphere(int d, rng_t& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(d);
  double n = 0.0;
  do {
    for (int i = 0; i < d; ++i) v(i) = normal(rng);
    n = v.norm();
  } while (n == 0.0);
  return v / n;
}

/// Uniform draw from the closed ball B(center, radius).
inline Vector sample_ball(const Vector& center, double radius, rng_t& rng) {
  const int d = static_cast<int>(center.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double scale = radius * std::pow(unit(rng), 1.0 / d);
  return center + scale * sample_unit_sphere(d, rng);
}

}  // namespace saddlelab
