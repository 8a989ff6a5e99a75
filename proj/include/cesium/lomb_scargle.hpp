#pragma once

// Multi-frequency, multi-harmonic Lomb-Scargle model fitted by prewhitening.
//
// The model for frequency l with harmonics k = 1..m is
//
//   y(t) = c_l + sum_k A_kl cos(2 pi k f_l t) + B_kl sin(2 pi k f_l t)
//
// Stage l scans a linear frequency grid, solves the (weighted) linear least
// squares problem for {c_l, A_kl, B_kl} at every candidate, keeps the
// candidate with the smallest residual, and subtracts that component from the
// working residual before the next stage.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cesium/core.hpp"
#include "cesium/error.hpp"

namespace cesium {

struct FrequencyGrid {
  double f_min = 0.0;
  double f_max = 0.0;
  std::size_t n_points = 0;

  double step() const { return (f_max - f_min) / static_cast<double>(n_points - 1); }
  double at(std::size_t i) const {
    return i + 1 == n_points ? f_max : f_min + step() * static_cast<double>(i);
  }

  void validate() const {
    if (!(f_min > 0.0) || !(f_max > f_min) || n_points < 2 || !std::isfinite(f_max))
      throw ValidationError("invalid frequency grid: need 0 < f_min < f_max and n_points >= 2");
  }

  /// f_min = 1/T, f_max = N/(2T) and `oversample`*N points, T = time span.
  static FrequencyGrid for_times(std::span<const double> times, double oversample = 5.0) {
    if (times.size() < 3) throw ValidationError("frequency grid needs ≥ 3 samples");
    const double span = times.back() - times.front();
    if (!(span > 0.0)) throw ValidationError("frequency grid needs a positive time span");
    const auto n = static_cast<double>(times.size());
    const auto points = static_cast<std::size_t>(std::max(2.0, std::round(oversample * n)));
    return FrequencyGrid{1.0 / span, 0.5 * n / span, points};
  }
};

struct LombScargleModel {
  std::size_t n_freq = 0;
  std::size_t n_harm = 0;
  std::vector<double> freqs;     ///< cycles per time unit, stage order
  std::vector<double> A;         ///< cosine amplitudes, [harmonic][frequency]
  std::vector<double> B;         ///< sine amplitudes, [harmonic][frequency]
  std::vector<double> offsets;   ///< constant term per stage
  std::vector<double> chi2_seq;  ///< weighted RSS before stage 1 and after each stage

  double cos_amp(std::size_t harm, std::size_t freq) const { return A[harm * n_freq + freq]; }
  double sin_amp(std::size_t harm, std::size_t freq) const { return B[harm * n_freq + freq]; }

  /// Sum of all fitted components at time t.
  double evaluate(double t) const {
    double y = 0.0;
    for (std::size_t l = 0; l < n_freq; ++l) {
      y += offsets[l];
      const double w = 2.0 * std::numbers::pi * freqs[l];
      for (std::size_t k = 0; k < n_harm; ++k) {
        const double arg = static_cast<double>(k + 1) * w * t;
        y += cos_amp(k, l) * std::cos(arg) + sin_amp(k, l) * std::sin(arg);
      }
    }
    return y;
  }

  friend bool operator==(const LombScargleModel&, const LombScargleModel&) = default;
};

namespace detail {

/// In-place Cholesky solve of the symmetric positive definite system M x = b
/// (M row-major, p x p). Returns false when a pivot collapses.
inline bool cholesky_solve(std::vector<double>& M, std::vector<double>& b, std::size_t p) {
  double scale = 0.0;
  for (std::size_t i = 0; i < p; ++i) scale = std::max(scale, M[i * p + i]);
  const double tol = scale * 1e-12;
  for (std::size_t j = 0; j < p; ++j) {
    double d = M[j * p + j];
    for (std::size_t k = 0; k < j; ++k) d -= M[j * p + k] * M[j * p + k];
    if (!(d > tol)) return false;
    const double ljj = std::sqrt(d);
    M[j * p + j] = ljj;
    for (std::size_t i = j + 1; i < p; ++i) {
      double s = M[i * p + j];
      for (std::size_t k = 0; k < j; ++k) s -= M[i * p + k] * M[j * p + k];
      M[i * p + j] = s / ljj;
    }
  }
  for (std::size_t i = 0; i < p; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= M[i * p + k] * b[k];
    b[i] = s / M[i * p + i];
  }
  for (std::size_t i = p; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < p; ++k) s -= M[k * p + i] * b[k];
    b[i] = s / M[i * p + i];
  }
  return true;
}

/// Fills basis row [1, cos(kwt), sin(kwt) ...] for k = 1..m.
inline void harmonic_basis(double omega_t, std::size_t m, double* row) {
  const double c1 = std::cos(omega_t);
  const double s1 = std::sin(omega_t);
  row[0] = 1.0;
  double c = c1, s = s1;
  for (std::size_t k = 0; k < m; ++k) {
    row[1 + 2 * k] = c;
    row[2 + 2 * k] = s;
    const double cn = c * c1 - s * s1;
    s = s * c1 + c * s1;
    c = cn;
  }
}

struct SingleFit {
  double freq = 0.0;
  std::vector<double> coef;  ///< [offset, A_1, B_1, ..., A_m, B_m]
  double rss = std::numeric_limits<double>::infinity();
};

/// Weighted least squares fit of one harmonic series at frequency `f`.
inline std::optional<SingleFit> fit_frequency(std::span<const double> t, std::span<const double> y,
                                              std::span<const double> w, double f, std::size_t m) {
  const std::size_t p = 2 * m + 1;
  std::vector<double> M(p * p, 0.0), b(p, 0.0), row(p);
  const double omega = 2.0 * std::numbers::pi * f;
  double yy = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    harmonic_basis(omega * t[i], m, row.data());
    const double wi = w[i];
    for (std::size_t r = 0; r < p; ++r) {
      const double wr = wi * row[r];
      b[r] += wr * y[i];
      for (std::size_t c = 0; c <= r; ++c) M[r * p + c] += wr * row[c];
    }
    yy += wi * y[i] * y[i];
  }
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t c = r + 1; c < p; ++c) M[r * p + c] = M[c * p + r];
  std::vector<double> rhs = b;
  if (!cholesky_solve(M, rhs, p)) return std::nullopt;
  double explained = 0.0;
  for (std::size_t r = 0; r < p; ++r) explained += rhs[r] * b[r];
  return SingleFit{f, std::move(rhs), yy - explained};
}

inline double weighted_rss(std::span<const double> r, std::span<const double> w) {
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) s += w[i] * r[i] * r[i];
  return s;
}

/// fit_frequency with the RSS recomputed from the residuals; the normal
/// equation shortcut loses its digits when the fit is nearly exact.
inline std::optional<SingleFit> fit_frequency_exact(std::span<const double> t, std::span<const double> y,
                                                    std::span<const double> w, double f, std::size_t m) {
  auto fit = fit_frequency(t, y, w, f, m);
  if (!fit) return fit;
  std::vector<double> row(2 * m + 1);
  const double omega = 2.0 * std::numbers::pi * f;
  double rss = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    harmonic_basis(omega * t[i], m, row.data());
    double r = y[i];
    for (std::size_t k = 0; k < row.size(); ++k) r -= fit->coef[k] * row[k];
    rss += w[i] * r * r;
  }
  fit->rss = rss;
  return fit;
}

/// Golden-section search for the RSS minimum between the grid neighbours of
/// point `g`. Returns the grid fit unless a refined frequency does better.
inline SingleFit refine_frequency(std::span<const double> t, std::span<const double> y, std::span<const double> w,
                                  const FrequencyGrid& grid, std::size_t g, std::size_t m) {
  auto best = fit_frequency_exact(t, y, w, grid.at(g), m);
  double a = grid.at(g > 0 ? g - 1 : g), b = grid.at(g + 1 < grid.n_points ? g + 1 : g);
  auto eval = [&](double f) {
    auto fit = fit_frequency_exact(t, y, w, f, m);
    const double rss = fit ? fit->rss : std::numeric_limits<double>::infinity();
    if (fit && rss < best->rss) best = std::move(fit);
    return rss;
  };
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = eval(c), fd = eval(d);
  for (int it = 0; it < 60 && b - a > 1e-13 * b; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = eval(d);
    }
  }
  return std::move(*best);
}

}  // namespace detail

/// Fits `n_freq` frequencies with `n_harm` harmonics each by iterative
/// prewhitening over `grid`. Weights are 1/e^2 when the channel has errors.
/// Each stage takes the grid point of least weighted RSS and then polishes
/// it by golden-section search between that point's two grid neighbours.
inline LombScargleModel fit_lomb_scargle(const ChannelData& ch, std::size_t n_freq, std::size_t n_harm,
                                         const FrequencyGrid& grid) {
  if (n_freq < 1 || n_harm < 1) throw ValidationError("n_freq and n_harm must be ≥ 1");
  const std::size_t n = ch.size();
  if (n < 2 * n_harm + 2)
    throw ValidationError("Lomb-Scargle fit needs ≥ " + std::to_string(2 * n_harm + 2) + " samples");
  grid.validate();

  const std::vector<double> t = ch.resolved_times();
  std::vector<double> w(n, 1.0);
  if (ch.has_errors())
    for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / (ch.errors[i] * ch.errors[i]);

  // Working residual, starting from the data about its weighted mean.
  double wsum = 0.0, wy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    wsum += w[i];
    wy += w[i] * ch.values[i];
  }
  const double wmean = wy / wsum;
  std::vector<double> resid(n);
  double energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    resid[i] = ch.values[i] - wmean;
    energy += w[i] * ch.values[i] * ch.values[i];
  }
  // A constant signal leaves only rounding noise about its mean.
  if (detail::weighted_rss(resid, w) <= 1e-24 * energy) std::fill(resid.begin(), resid.end(), 0.0);

  LombScargleModel model;
  model.n_freq = n_freq;
  model.n_harm = n_harm;
  model.A.assign(n_harm * n_freq, 0.0);
  model.B.assign(n_harm * n_freq, 0.0);
  model.chi2_seq.push_back(detail::weighted_rss(resid, w));

  for (std::size_t l = 0; l < n_freq; ++l) {
    std::optional<std::size_t> best_g;
    double best_rss = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < grid.n_points; ++g) {
      auto fit = detail::fit_frequency(t, resid, w, grid.at(g), n_harm);
      if (fit && (!best_g || fit->rss < best_rss)) {
        best_g = g;
        best_rss = fit->rss;
      }
    }
    if (!best_g) throw ValidationError("degenerate signal");
    std::optional<detail::SingleFit> best = detail::refine_frequency(t, resid, w, grid, *best_g, n_harm);

    const double omega = 2.0 * std::numbers::pi * best->freq;
    std::vector<double> row(2 * n_harm + 1);
    std::vector<double> next(n);
    for (std::size_t i = 0; i < n; ++i) {
      detail::harmonic_basis(omega * t[i], n_harm, row.data());
      double fitted = 0.0;
      for (std::size_t r = 0; r < row.size(); ++r) fitted += best->coef[r] * row[r];
      next[i] = resid[i] - fitted;
    }
    // The all-zero component is itself a candidate, so a stage must never
    // raise the residual. Rounding on a flat residual can; keep zero then.
    if (detail::weighted_rss(next, w) > model.chi2_seq.back())
      std::fill(best->coef.begin(), best->coef.end(), 0.0);
    else
      resid = std::move(next);
    model.freqs.push_back(best->freq);
    // The first stage also carries the weighted mean removed up front.
    model.offsets.push_back(best->coef[0] + (l == 0 ? wmean : 0.0));
    for (std::size_t k = 0; k < n_harm; ++k) {
      model.A[k * n_freq + l] = best->coef[1 + 2 * k];
      model.B[k * n_freq + l] = best->coef[2 + 2 * k];
    }
    model.chi2_seq.push_back(detail::weighted_rss(resid, w));
  }
  return model;
}

inline LombScargleModel fit_lomb_scargle(const ChannelData& ch, std::size_t n_freq, std::size_t n_harm) {
  const auto t = ch.resolved_times();
  return fit_lomb_scargle(ch, n_freq, n_harm, FrequencyGrid::for_times(t));
}

/// Wraps an angle to (-pi, pi].
inline double wrap_phase(double x) {
  double r = std::remainder(x, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

/// Fraction of the remaining weighted RSS removed by stage `l` (1-based); 0
/// when nothing was left to explain.
inline double stage_significance(const LombScargleModel& m, std::size_t l) {
  const double before = m.chi2_seq[l - 1];
  if (!(before > 0.0)) return 0.0;
  return 1.0 - m.chi2_seq[l] / before;
}

/// Named scalar features of a fitted model, in a fixed order:
/// for each frequency l, freq{l}_freq, freq{l}_signif, then per harmonic k
/// freq{l}_amplitude{k} and freq{l}_rel_phase{k}.
inline std::vector<std::pair<std::string, double>> lomb_scargle_features(const LombScargleModel& m) {
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t l = 0; l < m.n_freq; ++l) {
    const std::string prefix = "freq" + std::to_string(l + 1) + "_";
    out.emplace_back(prefix + "freq", m.freqs[l]);
    out.emplace_back(prefix + "signif", stage_significance(m, l + 1));
    const double base_phase = std::atan2(m.sin_amp(0, l), m.cos_amp(0, l));
    for (std::size_t k = 0; k < m.n_harm; ++k) {
      const double a = m.cos_amp(k, l), b = m.sin_amp(k, l);
      out.emplace_back(prefix + "amplitude" + std::to_string(k + 1), std::hypot(a, b));
      const double rel =
          k == 0 ? 0.0 : wrap_phase(std::atan2(b, a) - static_cast<double>(k + 1) * base_phase);
      out.emplace_back(prefix + "rel_phase" + std::to_string(k + 1), rel);
    }
  }
  return out;
}

}  // namespace cesium
