#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cesium/wavelet.hpp"
#include "oracles.hpp"

using namespace cesium;

namespace {

std::vector<double> random_values(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 10.0);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

double max_abs(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

}  // namespace

TEST(Haar, ConstantSignalHasZeroDetail) {
  const std::vector<double> v{1, 1, 1, 1};
  const auto b = haar_wavedec(v, 1);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b[0].size(), 2u);
  for (double a : b[0]) EXPECT_NEAR(a, std::numbers::sqrt2, 1e-15);
  for (double d : b[1]) EXPECT_EQ(d, 0.0);
}

TEST(Haar, Ramp) {
  const std::vector<double> v{1, 2, 3, 4};
  const auto b = haar_wavedec(v, 1);
  EXPECT_NEAR(b[0][0], 3 / std::numbers::sqrt2, 1e-15);
  EXPECT_NEAR(b[0][1], 7 / std::numbers::sqrt2, 1e-15);
  EXPECT_NEAR(b[0][0], 2.12132, 1e-5);
  EXPECT_NEAR(b[0][1], 4.94975, 1e-5);
  EXPECT_NEAR(b[1][0], -1 / std::numbers::sqrt2, 1e-15);
  EXPECT_NEAR(b[1][1], -1 / std::numbers::sqrt2, 1e-15);
}

TEST(Haar, LevelFourGivesFiveBands) {
  std::mt19937_64 rng(1);
  const auto v = random_values(rng, 4097);
  const auto b = haar_wavedec(v, 4);
  ASSERT_EQ(b.size(), 5u);
  // Lengths follow ceil halving: 4097 -> 2049 -> 1025 -> 513 -> 257.
  EXPECT_EQ(b[0].size(), 257u);
  EXPECT_EQ(b[1].size(), 257u);
  EXPECT_EQ(b[2].size(), 513u);
  EXPECT_EQ(b[3].size(), 1025u);
  EXPECT_EQ(b[4].size(), 2049u);
}

TEST(Haar, MatchesFilterDefinition) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 16 + rng() % 500;
    const int level = 1 + static_cast<int>(rng() % 4);
    const auto v = random_values(rng, n);
    const auto got = haar_wavedec(v, level);
    const auto want = oracle::haar(v, level);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t b = 0; b < got.size(); ++b) {
      ASSERT_EQ(got[b].size(), want[b].size());
      const double scale = max_abs(want[b]) + 1e-300;
      for (std::size_t i = 0; i < got[b].size(); ++i) EXPECT_LE(std::fabs(got[b][i] - want[b][i]) / scale, 1e-12);
    }
  }
}

TEST(Haar, SingleLevelConservesEnergy) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto v = random_values(rng, 2 * (1 + rng() % 500));
    const auto b = haar_wavedec(v, 1);
    oracle::LD in = 0, out = 0;
    for (double x : v) in += static_cast<oracle::LD>(x) * x;
    for (const auto& band : b)
      for (double x : band) out += static_cast<oracle::LD>(x) * x;
    EXPECT_LE(std::fabs(static_cast<double>((out - in) / in)), 1e-13);
  }
}

TEST(Haar, ReconstructionRecoversInput) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 16 + rng() % 1000;
    const int level = 1 + static_cast<int>(rng() % 4);
    const auto v = random_values(rng, n);
    const auto rec = haar_waverec(haar_wavedec(v, level));
    ASSERT_GE(rec.size(), n);
    const double scale = max_abs(v);
    for (std::size_t i = 0; i < n; ++i) EXPECT_LE(std::fabs(rec[i] - v[i]) / scale, 1e-12) << i;
  }
}

TEST(Haar, Rejections) {
  const std::vector<double> empty;
  EXPECT_THROW(haar_wavedec(empty, 1), ValidationError);
  const std::vector<double> v{1, 2, 3};
  EXPECT_THROW(haar_wavedec(v, 0), ValidationError);
  EXPECT_THROW(haar_wavedec(v, 4), ValidationError);
}
