#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace segseq {

inline double log_sum_exp(std::span<const double> v) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : v) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double x : v) s += std::exp(x - hi);
  return hi + std::log(s);
}

inline double log_sum_exp(double a, double b) {
  const double hi = std::max(a, b);
  if (!std::isfinite(hi)) return hi;
  return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

/// Overwrites logits with their softmax.
inline void softmax_in_place(std::span<double> logits) {
  const double z = log_sum_exp(logits);
  for (double& x : logits) x = std::exp(x - z);
}

}  // namespace segseq
