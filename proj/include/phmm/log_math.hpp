#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace phmm {

// Log-domain probability. -inf is probability zero; never NaN.
using LogProb = double;

inline constexpr LogProb kLogZero = -std::numeric_limits<double>::infinity();

inline LogProb safe_log(double p) { return p > 0.0 ? std::log(p) : kLogZero; }

// log(exp(a) + exp(b)) with logsumexp(-inf, x) = x.
inline LogProb log_add(LogProb a, LogProb b) {
  if (a < b) std::swap(a, b);
  if (b == kLogZero) return a;
  return a + std::log1p(std::exp(b - a));
}

inline LogProb log_sum_exp(std::span<const LogProb> values) {
  if (values.empty()) return kLogZero;
  const LogProb peak = *std::max_element(values.begin(), values.end());
  if (peak == kLogZero) return kLogZero;
  double sum = 0.0;
  for (LogProb v : values) sum += std::exp(v - peak);
  return peak + std::log(sum);
}

}  // namespace phmm
