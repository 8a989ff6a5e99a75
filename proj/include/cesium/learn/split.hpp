#pragma once

// Seeded train/test splits and stratified cross-validation folds.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cesium/error.hpp"
#include "cesium/learn/random.hpp"

namespace cesium::learn {

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

namespace detail {

/// Indices grouped by label, groups in lexicographic label order.
inline std::map<std::string, std::vector<std::size_t>> group_by_label(
    std::span<const std::string> labels) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  return groups;
}

}  // namespace detail

/// Splits 0..n-1 into disjoint train/test sets with |test| = round(n * f).
/// With `labels`, each class gets its share of the test set (largest
/// remainder allocation); every class needs at least two members.
inline Split train_test_split(std::size_t n, double test_fraction, std::uint64_t seed,
                              std::span<const std::string> labels = {}) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ValidationError("test fraction must lie in (0, 1)");
  if (n < 2) throw ValidationError("need at least 2 samples to split");
  if (!labels.empty() && labels.size() != n) throw ValidationError("label count differs from n");
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  if (n_test == 0 || n_test >= n)
    throw ValidationError("test fraction leaves an empty train or test set");

  Rng rng(derive_seed(seed, 0));
  Split out;
  if (labels.empty()) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(std::span(perm));
    out.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  } else {
    auto groups = detail::group_by_label(labels);
    struct Share {
      std::vector<std::size_t>* members;
      std::size_t take;
      double remainder;
    };
    std::vector<Share> shares;
    std::size_t allocated = 0;
    for (auto& [label, members] : groups) {
      if (members.size() < 2)
        throw ValidationError("class '" + label + "' has too few samples for a stratified split");
      const double exact = static_cast<double>(members.size()) * test_fraction;
      const auto base = static_cast<std::size_t>(std::floor(exact));
      shares.push_back({&members, base, exact - static_cast<double>(base)});
      allocated += base;
    }
    std::vector<std::size_t> order(shares.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return shares[a].remainder > shares[b].remainder; });
    for (std::size_t k = 0; allocated < n_test && k < order.size(); ++k, ++allocated) ++shares[order[k]].take;
    for (auto& s : shares) {
      rng.shuffle(std::span(*s.members));
      for (std::size_t j = 0; j < s.members->size(); ++j)
        (j < s.take ? out.test : out.train).push_back((*s.members)[j]);
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

/// Fold number (0..k-1) for every sample. Each class is shuffled and dealt
/// round-robin, continuing where the previous class stopped, so every fold
/// holds floor or ceil of its share of each class.
inline std::vector<std::size_t> stratified_folds(std::span<const std::string> labels, std::size_t k,
                                                 std::uint64_t seed) {
  if (k < 2) throw ValidationError("cv_folds must be ≥ 2");
  if (labels.size() < k)
    throw ValidationError("need at least " + std::to_string(k) + " samples for " + std::to_string(k) +
                          "-fold cross-validation");
  Rng rng(derive_seed(seed, 1));
  std::vector<std::size_t> fold(labels.size());
  std::size_t offset = 0;
  for (auto& [label, members] : detail::group_by_label(labels)) {
    rng.shuffle(std::span(members));
    for (std::size_t j = 0; j < members.size(); ++j) fold[members[j]] = (offset + j) % k;
    offset += members.size();
  }
  return fold;
}

}  // namespace cesium::learn
