#pragma once

#include <cmath>

namespace dego {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kLogTwoPi = 1.8378770664093454836;

// Standard normal density.
inline double norm_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

// Standard normal distribution function, accurate over the full double range
// through the complementary error function.
inline double norm_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

// Log density of N(mean, var) at y. var must be positive.
inline double gaussian_log_density(double y, double mean, double var) {
  const double r = y - mean;
  return -0.5 * (kLogTwoPi + std::log(var) + r * r / var);
}

}  // namespace dego
