#pragma once

// Multilevel Haar (db1) discrete wavelet transform.
//
// Odd-length inputs to a stage are padded by repeating their last sample, so
// coefficients differ from libraries that use symmetric or periodic padding.

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "cesium/error.hpp"

namespace cesium {

struct HaarLevel {
  std::vector<double> approx;
  std::vector<double> detail;
};

/// One analysis step.
inline HaarLevel haar_step(std::span<const double> v) {
  if (v.empty()) throw ValidationError("wavelet transform of empty input");
  const std::size_t half = (v.size() + 1) / 2;
  HaarLevel out{std::vector<double>(half), std::vector<double>(half)};
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  for (std::size_t i = 0; i < half; ++i) {
    const double a = v[2 * i];
    const double b = 2 * i + 1 < v.size() ? v[2 * i + 1] : v.back();
    out.approx[i] = (a + b) * inv_sqrt2;
    out.detail[i] = (a - b) * inv_sqrt2;
  }
  return out;
}

/// Returns [approx_L, detail_L, ..., detail_1]: level + 1 bands.
inline std::vector<std::vector<double>> haar_wavedec(std::span<const double> values, int level) {
  if (values.empty()) throw ValidationError("wavelet transform of empty input");
  if (level < 1) throw ValidationError("wavelet level must be ≥ 1");
  std::vector<std::vector<double>> details;
  std::vector<double> approx(values.begin(), values.end());
  for (int l = 0; l < level; ++l) {
    if (approx.size() < 2)
      throw ValidationError("input of length " + std::to_string(values.size()) +
                            " is too short for level " + std::to_string(level));
    HaarLevel step = haar_step(approx);
    details.push_back(std::move(step.detail));
    approx = std::move(step.approx);
  }
  std::vector<std::vector<double>> bands;
  bands.push_back(std::move(approx));
  for (auto it = details.rbegin(); it != details.rend(); ++it) bands.push_back(std::move(*it));
  return bands;
}

/// Inverse of haar_wavedec. The result has the padded length (2^level times
/// the approximation length); trim to the original length when it was padded.
inline std::vector<double> haar_waverec(const std::vector<std::vector<double>>& bands) {
  if (bands.size() < 2) throw ValidationError("wavelet reconstruction needs ≥ 2 bands");
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  std::vector<double> approx = bands[0];
  for (std::size_t b = 1; b < bands.size(); ++b) {
    const auto& detail = bands[b];
    // Padding may have added one approximation sample at the next level.
    if (approx.size() == detail.size() + 1) approx.pop_back();
    if (approx.size() != detail.size())
      throw ValidationError("wavelet band lengths are inconsistent");
    std::vector<double> next(2 * detail.size());
    for (std::size_t i = 0; i < detail.size(); ++i) {
      next[2 * i] = (approx[i] + detail[i]) * inv_sqrt2;
      next[2 * i + 1] = (approx[i] - detail[i]) * inv_sqrt2;
    }
    approx = std::move(next);
  }
  return approx;
}

}  // namespace cesium
