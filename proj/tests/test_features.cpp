#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cesium/features.hpp"
#include "oracles.hpp"

using namespace cesium;

namespace {

std::map<std::string, double> compute(const ChannelData& ch, const std::vector<std::string>& names,
                                      const FeatureParams& p = {}) {
  const auto out = execute(build_feature_graph(names, {}, p), ch);
  std::map<std::string, double> r;
  for (const auto& [k, v] : out) r[k] = std::get<double>(v);
  return r;
}

double feature(const std::string& name, ChannelData ch) { return compute(ch, {name}).at(name); }

ChannelData vals(std::vector<double> v) { return ChannelData{{}, std::move(v), {}}; }

// Lengths 2..1000, with and without errors and explicit times.
std::vector<ChannelData> random_channels(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<ChannelData> out;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t n = i == 0 ? 2 : i == 1 ? 1000 : 2 + rng() % 999;
    out.push_back(oracle::random_channel(rng, n, i % 2 == 0, i % 4 != 3));
  }
  return out;
}

bool on_threshold(const std::vector<double>& v) {
  const double mu = oracle::mean(v), sd = oracle::std_pop(v), med = oracle::sorted_median(v);
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double window = 0.1 * (*hi - *lo);
  for (double x : v) {
    if (std::fabs(std::fabs(x - mu) - sd) <= 1e-9 * (sd + std::fabs(mu))) return true;
    if (std::fabs(std::fabs(x - med) - window) <= 1e-9 * (window + std::fabs(med))) return true;
  }
  return false;
}

}  // namespace

TEST(Catalog, HasSixteenSummaryFeaturesPlusLombScargle) {
  EXPECT_EQ(summary_feature_names().size(), 16u);
  const auto cat = feature_catalog();
  std::set<std::string> names;
  for (const auto& e : cat) {
    names.insert(e.name);
    EXPECT_FALSE(e.description.empty()) << e.name;
  }
  EXPECT_EQ(names.size(), cat.size());
  for (const auto& s : summary_feature_names()) EXPECT_TRUE(names.count(s)) << s;
  for (const char* s : {"freq1_freq", "freq1_signif", "freq1_amplitude1", "freq1_rel_phase4"})
    EXPECT_TRUE(names.count(s)) << s;
  FeatureParams p;
  p.ls_n_freq = 3;
  p.ls_n_harm = 2;
  EXPECT_EQ(feature_catalog(p).size(), 16u + 3 * (2 + 2 * 2));
}

TEST(Oracle, AllSummaryFeaturesMatchOnRandomChannels) {
  const auto names = summary_feature_names();
  const auto graph = build_feature_graph(names);
  std::size_t compared = 0;
  for (const auto& ch : random_channels(100, 20240611)) {
    ASSERT_TRUE(validate_channel(ch).empty());
    const auto expected = oracle::summary_features(ch);
    const auto got = execute(graph, ch);
    for (const auto& name : names) {
      const double a = std::get<double>(got.at(name)), b = expected.at(name);
      EXPECT_LE(oracle::rel_diff(a, b), 1e-12) << name << " n=" << ch.size() << " got " << a << " want " << b;
      ++compared;
    }
  }
  EXPECT_EQ(compared, 1600u);
}

TEST(Examples, WeightedAverage) {
  EXPECT_DOUBLE_EQ(feature("weighted_average", ChannelData{{}, {1, 3}, {1, 0.5}}), 2.6);
  EXPECT_EQ(feature("weighted_average", vals({1, 2, 6})), 3.0);
}

TEST(Examples, AbsDiffs) { EXPECT_EQ(feature("abs_diffs", vals({1, 4, 2})), 5.0); }

TEST(Examples, MaxSlope) { EXPECT_EQ(feature("max_slope", ChannelData{{0, 1, 3}, {0, 2, 1}, {}}), 2.0); }

TEST(Examples, SkewOfSymmetricData) { EXPECT_EQ(feature("skew", vals({1, 2, 3})), 0.0); }

TEST(Examples, ConstantSeries) {
  const auto r = compute(vals({4, 4, 4, 4}), {"amplitude", "percent_beyond_1_std", "percent_close_to_median", "std",
                                              "skew", "median_absolute_deviation"});
  EXPECT_EQ(r.at("amplitude"), 0.0);
  EXPECT_EQ(r.at("percent_beyond_1_std"), 0.0);
  EXPECT_EQ(r.at("percent_close_to_median"), 1.0);
  EXPECT_EQ(r.at("std"), 0.0);
  EXPECT_EQ(r.at("skew"), 0.0);
  EXPECT_EQ(r.at("median_absolute_deviation"), 0.0);
}

TEST(Examples, MedianAndMad) {
  EXPECT_EQ(feature("median", vals({5, 1, 3, 2})), 2.5);
  EXPECT_EQ(feature("median_absolute_deviation", vals({1, 1, 2, 2, 4, 6, 9})), 1.0);
}

TEST(Examples, PercentFeatures) {
  // mean 2.5, population std sqrt(1.25) ~ 1.118: 1 and 4 lie beyond.
  EXPECT_EQ(feature("percent_beyond_1_std", vals({1, 2, 3, 4})), 0.5);
  // median 5, window 0.1 * 10 = 1: 4, 5, 6 are close.
  EXPECT_EQ(feature("percent_close_to_median", vals({0, 4, 5, 6, 10})), 0.6);
  FeatureParams p;
  p.median_window = 0.5;
  EXPECT_EQ(compute(vals({0, 4, 5, 6, 10}), {"percent_close_to_median"}, p).at("percent_close_to_median"), 1.0);
}

TEST(Examples, MomentsAndCount) {
  const auto r = compute(vals({1, 2, 3, 4, 10}), {"mean", "mean2", "std", "n_epochs", "weighted_std_dev"});
  EXPECT_EQ(r.at("mean"), 4.0);
  EXPECT_EQ(r.at("mean2"), 26.0);
  EXPECT_DOUBLE_EQ(r.at("std"), std::sqrt(10.0));
  EXPECT_EQ(r.at("n_epochs"), 5.0);
  EXPECT_DOUBLE_EQ(r.at("weighted_std_dev"), std::sqrt(10.0));
}

TEST(Errors, NeedTwoSamples) {
  const auto g = build_feature_graph({"max_slope", "abs_diffs"});
  const auto r = execute_partial(g, vals({1}));
  ASSERT_EQ(r.failures.size(), 2u);
  for (const auto& [k, msg] : r.failures) EXPECT_NE(msg.find("needs ≥ 2 samples"), std::string::npos) << msg;
}

TEST(Properties, ShiftInvariance) {
  const std::vector<std::string> shifted{"mean", "median", "minimum", "maximum", "weighted_average"};
  const std::vector<std::string> fixed{"std", "amplitude", "median_absolute_deviation", "skew",
                                       "percent_beyond_1_std", "percent_close_to_median"};
  std::vector<std::string> all = shifted;
  all.insert(all.end(), fixed.begin(), fixed.end());
  const auto g = build_feature_graph(all);
  std::mt19937_64 rng(7);
  for (const auto& ch : random_channels(40, 99)) {
    const double c = std::uniform_real_distribution<double>(-50, 50)(rng);
    ChannelData moved = ch;
    for (double& v : moved.values) v += c;
    const auto a = execute(g, ch), b = execute(g, moved);
    // Tolerance relative to the data scale, which is what a shift perturbs.
    double scale = 0;
    for (double v : moved.values) scale = std::max(scale, std::fabs(v));
    for (const auto& name : shifted)
      EXPECT_NEAR(std::get<double>(b.at(name)), std::get<double>(a.at(name)) + c, 1e-9 * scale) << name;
    for (const auto& name : {"std", "amplitude", "median_absolute_deviation"})
      EXPECT_NEAR(std::get<double>(b.at(name)), std::get<double>(a.at(name)), 1e-9 * scale) << name;
    for (const auto& name : {"skew", "percent_beyond_1_std", "percent_close_to_median"})
      EXPECT_NEAR(std::get<double>(b.at(name)), std::get<double>(a.at(name)), 1e-9) << name;
  }
}

TEST(Properties, ShiftInvarianceExactForDyadicData) {
  // Small integers shifted by a power of two: every operation is exact.
  std::mt19937_64 rng(3);
  const std::vector<std::string> names{"mean", "median", "minimum", "maximum", "weighted_average", "std",
                                       "amplitude", "median_absolute_deviation", "skew", "percent_beyond_1_std",
                                       "percent_close_to_median"};
  for (int trial = 0; trial < 20; ++trial) {
    ChannelData ch;
    for (int i = 0; i < 64; ++i) ch.values.push_back(static_cast<double>(rng() % 17));
    ChannelData moved = ch;
    for (double& v : moved.values) v += 1024.0;
    const auto a = compute(ch, names), b = compute(moved, names);
    for (const auto& n : {"mean", "median", "minimum", "maximum", "weighted_average"})
      EXPECT_NEAR(b.at(n), a.at(n) + 1024.0, 1e-9) << n;
    for (const auto& n : {"std", "amplitude", "median_absolute_deviation", "skew", "percent_beyond_1_std",
                          "percent_close_to_median"})
      EXPECT_NEAR(b.at(n), a.at(n), 1e-9) << n;
  }
}

TEST(Properties, ScaleEquivariance) {
  const std::vector<std::string> names{"amplitude", "std", "median_absolute_deviation", "abs_diffs", "skew",
                                       "percent_beyond_1_std", "percent_close_to_median"};
  const auto g = build_feature_graph(names);
  for (const double s : {0.001, 0.5, 4.0, 1e6}) {
    for (const auto& ch : random_channels(30, 5)) {
      ChannelData scaled = ch;
      for (double& v : scaled.values) v *= s;
      const auto a = execute(g, ch), b = execute(g, scaled);
      for (const auto& n : {"amplitude", "std", "median_absolute_deviation", "abs_diffs"})
        EXPECT_LE(oracle::rel_diff(std::get<double>(b.at(n)), s * std::get<double>(a.at(n))), 1e-9) << n;
      EXPECT_NEAR(std::get<double>(b.at("skew")), std::get<double>(a.at("skew")), 1e-9);
      // Samples sitting on a threshold (every length-2 channel does) may flip either way.
      if (on_threshold(ch.values)) continue;
      for (const auto& n : {"percent_beyond_1_std", "percent_close_to_median"})
        EXPECT_NEAR(std::get<double>(b.at(n)), std::get<double>(a.at(n)), 1e-9) << n;
    }
  }
}

TEST(LombScargleFeatures, PureSinusoidModel) {
  LombScargleModel m;
  m.n_freq = 1;
  m.n_harm = 1;
  m.freqs = {0.25};
  m.A = {0.0};
  m.B = {1.0};
  m.offsets = {0.0};
  m.chi2_seq = {10.0, 1.0};
  std::map<std::string, double> f;
  for (const auto& [k, v] : lomb_scargle_features(m)) f[k] = v;
  EXPECT_EQ(f.at("freq1_amplitude1"), 1.0);
  EXPECT_EQ(f.at("freq1_rel_phase1"), 0.0);
  EXPECT_EQ(f.at("freq1_freq"), 0.25);
  EXPECT_DOUBLE_EQ(f.at("freq1_signif"), 0.9);
}

TEST(LombScargleFeatures, RelativePhaseWrapped) {
  LombScargleModel m;
  m.n_freq = 1;
  m.n_harm = 2;
  m.freqs = {1.0};
  // First harmonic at phase 3, second at phase -3: relative -3 - 2*3 = -9 -> -9 + 2 pi.
  m.A = {std::cos(3.0), std::cos(-3.0)};
  m.B = {std::sin(3.0), std::sin(-3.0)};
  m.offsets = {0.0};
  m.chi2_seq = {1.0, 0.5};
  std::map<std::string, double> f;
  for (const auto& [k, v] : lomb_scargle_features(m)) f[k] = v;
  EXPECT_NEAR(f.at("freq1_rel_phase2"), -9.0 + 2.0 * std::numbers::pi, 1e-12);
  EXPECT_GT(f.at("freq1_rel_phase2"), -std::numbers::pi);
  EXPECT_LE(f.at("freq1_rel_phase2"), std::numbers::pi);
  EXPECT_EQ(wrap_phase(-std::numbers::pi), std::numbers::pi);
}

TEST(LombScargleFeatures, AllFiniteOnRandomData) {
  FeatureParams p;
  p.ls_n_freq = 2;
  p.ls_n_harm = 3;
  std::vector<std::string> names;
  for (const auto& e : feature_catalog(p)) names.push_back(e.name);
  const auto g = build_feature_graph(names, {}, p);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 10; ++i) {
    const auto ch = oracle::random_channel(rng, 40 + rng() % 60, i % 2, true);
    for (const auto& [k, v] : execute(g, ch)) EXPECT_TRUE(std::isfinite(std::get<double>(v))) << k;
  }
}
