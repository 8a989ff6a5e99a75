#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cesium/lomb_scargle.hpp"
#include "oracles.hpp"

using namespace cesium;

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

std::vector<double> irregular_times(std::mt19937_64& rng, std::size_t n, double span) {
  std::uniform_real_distribution<double> u(0.0, span);
  std::vector<double> t(n);
  for (auto& x : t) x = u(rng);
  std::sort(t.begin(), t.end());
  for (std::size_t i = 1; i < n; ++i)
    if (t[i] <= t[i - 1]) t[i] = std::nextafter(t[i - 1], INFINITY);
  return t;
}

std::vector<double> grid_points(const FrequencyGrid& g) {
  std::vector<double> f(g.n_points);
  for (std::size_t i = 0; i < g.n_points; ++i) f[i] = g.at(i);
  return f;
}

std::vector<double> weights(const ChannelData& ch) {
  std::vector<double> w(ch.size(), 1.0);
  for (std::size_t i = 0; i < ch.errors.size(); ++i) w[i] = 1.0 / (ch.errors[i] * ch.errors[i]);
  return w;
}

void expect_non_increasing(const LombScargleModel& m) {
  ASSERT_EQ(m.chi2_seq.size(), m.n_freq + 1);
  for (std::size_t l = 1; l < m.chi2_seq.size(); ++l) EXPECT_LE(m.chi2_seq[l], m.chi2_seq[l - 1]) << "stage " << l;
}

std::map<std::string, double> features_of(const LombScargleModel& m) {
  std::map<std::string, double> out;
  for (const auto& [k, v] : lomb_scargle_features(m)) out[k] = v;
  return out;
}

}  // namespace

TEST(LombScargle, SingleSinusoidMatchesBruteForce) {
  std::mt19937_64 rng(1);
  ChannelData ch;
  ch.times = irregular_times(rng, 200, 100.0);
  for (double t : ch.times) ch.values.push_back(std::sin(two_pi * 0.2 * t));
  const auto grid = FrequencyGrid::for_times(ch.times);
  const auto m = fit_lomb_scargle(ch, 1, 1, grid);

  EXPECT_LE(std::fabs(m.freqs[0] - 0.2), grid.step());
  EXPECT_LT(m.chi2_seq[1] / m.chi2_seq[0], 1e-3);
  expect_non_increasing(m);

  // Independent dense scan at ten times the grid resolution.
  const auto dense = oracle::dense_scan(ch.times, ch.values, weights(ch), grid.f_min, grid.f_max,
                                        10 * grid.n_points, 1);
  EXPECT_LE(std::fabs(m.freqs[0] - dense.freq), grid.step());
  EXPECT_NEAR(dense.freq, 0.2, grid.step() / 10);

  // No grid candidate beats the refined fit.
  const auto best = oracle::scan(ch.times, ch.values, weights(ch), grid_points(grid), 1);
  EXPECT_LE(m.chi2_seq[1], static_cast<double>(best.rss) * (1 + 1e-6) + 1e-20);
  EXPECT_LE(std::fabs(m.freqs[0] - best.freq), grid.step());
}

TEST(LombScargle, RecoversInjectedFrequencyOnRandomSeries) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  int recovered = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 60 + rng() % 140;
    const double span = 20.0 + 80.0 * u(rng);
    ChannelData ch;
    ch.times = irregular_times(rng, n, span);
    const auto grid = FrequencyGrid::for_times(ch.times);
    const double f = grid.f_min * 5 + (0.8 * grid.f_max - grid.f_min * 5) * u(rng);
    const double amp = 0.5 + 5 * u(rng), phase = two_pi * u(rng), offset = 10 * g(rng);
    const bool with_errors = trial % 2 == 0;
    const std::size_t harmonics = trial % 3 == 0 ? 2 : 1;
    for (double t : ch.times) {
      double y = offset + amp * std::sin(two_pi * f * t + phase) + 0.05 * amp * g(rng);
      if (harmonics == 2) y += 0.3 * amp * std::cos(2 * two_pi * f * t);
      ch.values.push_back(y);
      if (with_errors) ch.errors.push_back(0.5 + u(rng));
    }
    const auto m = fit_lomb_scargle(ch, 1, harmonics, grid);
    expect_non_increasing(m);
    const bool hit = std::fabs(m.freqs[0] - f) <= grid.step();
    recovered += hit;
    EXPECT_TRUE(hit) << "trial " << trial << ": injected " << f << " fitted " << m.freqs[0] << " step "
                     << grid.step();

    const auto best = oracle::scan(ch.times, ch.values, weights(ch), grid_points(grid), harmonics);
    EXPECT_LE(std::fabs(m.freqs[0] - best.freq), grid.step()) << "trial " << trial;
    EXPECT_LE(m.chi2_seq[1], static_cast<double>(best.rss) * (1 + 1e-6)) << "trial " << trial;
  }
  EXPECT_EQ(recovered, 50);
}

TEST(LombScargle, TwoTonePrewhitening) {
  std::mt19937_64 rng(7);
  ChannelData ch;
  ch.times = irregular_times(rng, 300, 100.0);
  for (double t : ch.times) ch.values.push_back(std::sin(two_pi * 0.11 * t) + 0.5 * std::sin(two_pi * 0.37 * t));
  const auto grid = FrequencyGrid::for_times(ch.times);
  const auto m = fit_lomb_scargle(ch, 2, 1, grid);
  expect_non_increasing(m);
  EXPECT_LE(std::fabs(m.freqs[0] - 0.11), grid.step());
  EXPECT_LE(std::fabs(m.freqs[1] - 0.37), grid.step());

  // Stage-by-stage brute force: each stage is an exact weighted least-squares
  // fit of the previous residual at the fitted frequency, and no frequency in a
  // dense neighbourhood does better.
  const auto w = weights(ch);
  const double mean = oracle::mean(ch.values);
  oracle::LD chi0 = 0;
  for (double v : ch.values) chi0 += (v - mean) * (v - mean);
  EXPECT_NEAR(m.chi2_seq[0], static_cast<double>(chi0), 1e-9 * static_cast<double>(chi0));
  std::vector<double> resid = ch.values;
  for (std::size_t l = 0; l < 2; ++l) {
    std::vector<double> next;
    const auto rss = oracle::harmonic_rss(ch.times, resid, w, m.freqs[l], 1, &next);
    ASSERT_TRUE(rss);
    EXPECT_NEAR(m.chi2_seq[l + 1], static_cast<double>(*rss), 1e-9 * m.chi2_seq[0]) << "stage " << l;
    const auto local = oracle::dense_scan(ch.times, resid, w, m.freqs[l] - grid.step(), m.freqs[l] + grid.step(), 201, 1);
    EXPECT_LE(m.chi2_seq[l + 1], static_cast<double>(local.rss) * (1 + 1e-9)) << "stage " << l;
    resid = next;
  }
  for (std::size_t i = 0; i < ch.size(); ++i)
    EXPECT_NEAR(ch.values[i] - m.evaluate(ch.times[i]), resid[i], 1e-9);

  const auto f = features_of(m);
  EXPECT_GT(f.at("freq1_signif"), 0.5);
  EXPECT_GT(f.at("freq2_signif"), 0.5);
  EXPECT_NEAR(f.at("freq1_signif"), 1 - m.chi2_seq[1] / m.chi2_seq[0], 1e-15);
  // The first stage absorbs some leakage from the second tone, so amplitudes
  // are close to but not exactly the injected ones.
  EXPECT_NEAR(f.at("freq1_amplitude1"), 1.0, 0.1);
  EXPECT_NEAR(f.at("freq2_amplitude1"), 0.5, 0.1);
}

TEST(LombScargle, ConstantSignal) {
  ChannelData ch;
  for (int i = 0; i < 50; ++i) {
    ch.times.push_back(i * 1.3 + 0.1 * (i % 3));
    ch.values.push_back(3.25);
  }
  const auto m = fit_lomb_scargle(ch, 1, 2);
  for (double a : m.A) EXPECT_LT(std::fabs(a), 1e-8);
  for (double b : m.B) EXPECT_LT(std::fabs(b), 1e-8);
  EXPECT_NEAR(m.chi2_seq[0], 0.0, 1e-12);
  EXPECT_NEAR(m.chi2_seq[1], 0.0, 1e-12);
  EXPECT_NEAR(m.offsets[0], 3.25, 1e-12);
  const auto f = features_of(m);
  EXPECT_LT(f.at("freq1_amplitude1"), 1e-8);
  EXPECT_LT(f.at("freq1_amplitude2"), 1e-8);
  EXPECT_NEAR(f.at("freq1_signif"), 0.0, 1e-12);
}

TEST(LombScargle, ChiSquaredNonIncreasingOnNoise) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    ChannelData ch;
    ch.times = irregular_times(rng, 40 + rng() % 60, 30.0);
    for (std::size_t i = 0; i < ch.times.size(); ++i) ch.values.push_back(g(rng));
    const auto m = fit_lomb_scargle(ch, 3, 2);
    expect_non_increasing(m);
    for (double s : {features_of(m).at("freq1_signif"), features_of(m).at("freq3_signif")}) {
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 1.0);
    }
  }
}

TEST(LombScargle, ErrorsDownweightOutliers) {
  std::mt19937_64 rng(5);
  ChannelData ch;
  ch.times = irregular_times(rng, 150, 60.0);
  for (std::size_t i = 0; i < ch.times.size(); ++i) {
    const bool outlier = i % 5 == 0;
    ch.values.push_back(std::sin(two_pi * 0.3 * ch.times[i]) + (outlier ? 40.0 * std::cos(1.7 * ch.times[i]) : 0.0));
    ch.errors.push_back(outlier ? 1e4 : 0.1);
  }
  const auto grid = FrequencyGrid::for_times(ch.times);
  const auto m = fit_lomb_scargle(ch, 1, 1, grid);
  EXPECT_LE(std::fabs(m.freqs[0] - 0.3), grid.step());
}

TEST(LombScargle, ModelEvaluatesFittedCurve) {
  std::mt19937_64 rng(9);
  ChannelData ch;
  ch.times = irregular_times(rng, 120, 50.0);
  for (double t : ch.times) ch.values.push_back(2.0 + std::cos(two_pi * 0.25 * t) - 0.4 * std::sin(2 * two_pi * 0.25 * t));
  const auto m = fit_lomb_scargle(ch, 1, 2);
  double rss = 0;
  for (std::size_t i = 0; i < ch.size(); ++i) rss += std::pow(ch.values[i] - m.evaluate(ch.times[i]), 2);
  EXPECT_NEAR(rss, m.chi2_seq[1], 1e-9 + 1e-6 * m.chi2_seq[0]);
}

TEST(LombScargle, GridDefaults) {
  const std::vector<double> t{0.0, 1.0, 4.0, 10.0};
  const auto g = FrequencyGrid::for_times(t);
  EXPECT_DOUBLE_EQ(g.f_min, 0.1);
  EXPECT_DOUBLE_EQ(g.f_max, 0.5 * 4 / 10.0);
  EXPECT_EQ(g.n_points, 20u);
  EXPECT_EQ(g.at(0), g.f_min);
  EXPECT_EQ(g.at(19), g.f_max);
}

TEST(LombScargle, RejectsBadInput) {
  ChannelData few{{0, 1, 2}, {1, 2, 3}, {}};
  EXPECT_THROW(fit_lomb_scargle(few, 1, 1), ValidationError);
  ChannelData ok{{0, 1, 2, 3, 4, 5}, {1, 2, 3, 1, 2, 3}, {}};
  EXPECT_THROW(fit_lomb_scargle(ok, 0, 1), ValidationError);
  EXPECT_THROW(fit_lomb_scargle(ok, 1, 1, FrequencyGrid{0.5, 0.1, 10}), ValidationError);
}
