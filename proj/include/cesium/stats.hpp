#pragma once

// Summary statistics behind the builtin feature catalog. Moments are
// population moments (divide by N, no bias correction).
//
// Sums are compensated, and central moments re-center on the exact residual
// of the supplied mean: a mean rounded to the nearest double is off by up to
// half an ulp of the offset, which a third moment of a narrow, offset series
// would otherwise amplify into its leading digits.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "cesium/error.hpp"

namespace cesium::stats {

inline void require_samples(std::span<const double> v, std::size_t n) {
  if (v.size() < n) throw ValidationError("needs ≥ " + std::to_string(n) + " samples");
}

/// Neumaier-compensated running sum.
class Sum {
 public:
  void add(double x) {
    const double t = hi_ + x;
    lo_ += std::abs(hi_) >= std::abs(x) ? (hi_ - t) + x : (x - t) + hi_;
    hi_ = t;
  }
  double value() const { return hi_ + lo_; }

 private:
  double hi_ = 0.0, lo_ = 0.0;
};

inline double mean(std::span<const double> v) {
  require_samples(v, 1);
  Sum s;
  for (double x : v) s.add(x);
  return s.value() / static_cast<double>(v.size());
}

inline double central_moment(std::span<const double> v, double mu, int order) {
  const auto n = static_cast<double>(v.size());
  Sum r;
  for (double x : v) r.add(x - mu);
  const double correction = r.value() / n;
  Sum s;
  for (double x : v) {
    const double d = (x - mu) - correction;
    double p = d;
    for (int k = 1; k < order; ++k) p *= d;
    s.add(p);
  }
  return s.value() / n;
}

inline double std_dev(std::span<const double> v, double mu) {
  require_samples(v, 1);
  return std::sqrt(central_moment(v, mu, 2));
}

inline double mean_square(std::span<const double> v) {
  require_samples(v, 1);
  Sum s;
  for (double x : v) s.add(x * x);
  return s.value() / static_cast<double>(v.size());
}

/// Third standardized moment; 0 for a constant series.
inline double skew(std::span<const double> v, double mu) {
  require_samples(v, 1);
  const double m2 = central_moment(v, mu, 2);
  if (m2 <= 0.0) return 0.0;
  const double m3 = central_moment(v, mu, 3);
  return m3 / std::pow(m2, 1.5);
}

inline double abs_diffs(std::span<const double> v) {
  require_samples(v, 2);
  Sum s;
  for (std::size_t i = 1; i < v.size(); ++i) s.add(std::abs(v[i] - v[i - 1]));
  return s.value();
}

inline double maximum(std::span<const double> v) {
  require_samples(v, 1);
  return *std::max_element(v.begin(), v.end());
}

inline double minimum(std::span<const double> v) {
  require_samples(v, 1);
  return *std::min_element(v.begin(), v.end());
}

inline double median(std::span<const double> v) {
  require_samples(v, 1);
  std::vector<double> s(v.begin(), v.end());
  const std::size_t n = s.size();
  const std::size_t mid = n / 2;
  std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(mid), s.end());
  const double hi = s[mid];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

inline double median_absolute_deviation(std::span<const double> v, double med) {
  std::vector<double> dev(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) dev[i] = std::abs(v[i] - med);
  return median(dev);
}

/// Largest |dv/dt| between consecutive samples.
inline double max_slope(std::span<const double> t, std::span<const double> v) {
  require_samples(v, 2);
  double best = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i)
    best = std::max(best, std::abs((v[i] - v[i - 1]) / (t[i] - t[i - 1])));
  return best;
}

inline double percent_beyond_1_std(std::span<const double> v, double mu, double sd) {
  require_samples(v, 1);
  std::size_t n = 0;
  for (double x : v)
    if (std::abs(x - mu) > sd) ++n;
  return static_cast<double>(n) / static_cast<double>(v.size());
}

/// Fraction of samples with |v - median| <= window * (max - min); 1 when the
/// range is zero.
inline double percent_close_to_median(std::span<const double> v, double med, double max, double min,
                                      double window) {
  require_samples(v, 1);
  const double range = max - min;
  if (range <= 0.0) return 1.0;
  const double half_width = window * range;
  std::size_t n = 0;
  for (double x : v)
    if (std::abs(x - med) <= half_width) ++n;
  return static_cast<double>(n) / static_cast<double>(v.size());
}

/// Inverse-variance weighted mean; plain mean when `e` is empty.
inline double weighted_average(std::span<const double> v, std::span<const double> e) {
  if (e.empty()) return mean(v);
  require_samples(v, 1);
  Sum num, den;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double w = 1.0 / (e[i] * e[i]);
    num.add(v[i] * w);
    den.add(w);
  }
  return num.value() / den.value();
}

/// Inverse-variance weighted standard deviation about the weighted mean;
/// population std when `e` is empty.
inline double weighted_std_dev(std::span<const double> v, std::span<const double> e, double wmean) {
  if (e.empty()) return std_dev(v, wmean);
  require_samples(v, 1);
  Sum num, den;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double w = 1.0 / (e[i] * e[i]);
    const double d = v[i] - wmean;
    num.add(w * d * d);
    den.add(w);
  }
  return std::sqrt(num.value() / den.value());
}

}  // namespace cesium::stats
