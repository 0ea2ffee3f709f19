#pragma once

#include <cmath>
#include <limits>
#include <span>

namespace mchart {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

/* log(1 + e^z), exact for z = -inf and free of overflow for large z */
inline double softplus(double z) {
  if (z == kNegInf) return 0.0;
  return std::fmax(z, 0.0) + std::log1p(std::exp(-std::fabs(z)));
}

/* log(e^a + e^b) */
inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return std::fmax(a, b) + std::log1p(std::exp(-std::fabs(a - b)));
}

/* log(sum_i e^{v_i}); -inf for an empty span */
inline double log_sum_exp(std::span<const double> values) {
  double top = kNegInf;
  for (double v : values) top = std::fmax(top, v);
  if (top == kNegInf || top == kPosInf) return top;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - top);
  return top + std::log(sum);
}

}  // namespace mchart
