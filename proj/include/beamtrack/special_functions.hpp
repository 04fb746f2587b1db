#pragma once

#include <cmath>
#include <limits>

namespace beamtrack {

/// log I0(x) for x >= 0 without overflow.
inline double log_bessel_i0(double x) {
  x = std::abs(x);
  if (x < 30.0) return std::log(std::cyl_bessel_i(0.0, x));
  // Hankel asymptotic series: I0(x) ~ e^x / sqrt(2 pi x) * sum_k ((2k-1)!!)^2 / (k! (8x)^k)
  const double inv8x = 1.0 / (8.0 * x);
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 30; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= odd * odd * inv8x / k;
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return x - 0.5 * std::log(2.0 * 3.14159265358979323846 * x) + std::log(sum);
}

/// log(exp(a) + exp(b)) tolerant of -inf operands.
inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

}  // namespace beamtrack
