#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "viraal/error.hpp"

namespace viraal {

/// Mean / median / min / max / population std, the columns of the joint
/// error and timing tables.
struct Summary {
  double mean = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
  double stddev = 0.0;
  std::size_t count = 0;

  bool operator==(const Summary&) const = default;
};

/// Linear interpolation between closest ranks; q in [0, 1].
inline double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "percentile of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + (v[hi] - v[lo]) * frac;
}

inline double mean_of(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "mean of an empty sample");
  double s = 0.0;
  for (double x : values) s += x;
  return s / static_cast<double>(values.size());
}

inline double stddev_of(std::span<const double> values) {
  const double m = mean_of(values);
  double s = 0.0;
  for (double x : values) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(values.size()));
}

inline Summary summarize(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "summary of an empty sample");
  Summary s;
  s.count = values.size();
  s.mean = mean_of(values);
  s.stddev = stddev_of(values);
  s.median = percentile(values, 0.5);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  s.min = *lo;
  s.max = *hi;
  return s;
}

}  // namespace viraal
