#pragma once

// Random forest: bagged CART trees with Gini impurity.
//
// Each tree draws a bootstrap sample and, at every node, examines
// max_features randomly chosen columns (ceil(sqrt(p)) by default). If none of
// them separates the node, the remaining columns are tried in the same random
// order. Among equal-Gini splits the first one found wins: candidate columns
// in draw order, thresholds ascending. Trees grow until a node is pure, holds
// fewer than min_samples_split samples, or reaches max_depth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cesium/error.hpp"
#include "cesium/learn/random.hpp"

namespace cesium::learn {

struct TreeNode {
  int column = -1;  ///< -1 marks a leaf
  double threshold = 0.0;
  int left = -1;    ///< samples with x[column] <= threshold
  int right = -1;
  std::vector<double> distribution;  ///< class fractions at a leaf

  bool is_leaf() const { return column < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  ///< nodes[0] is the root

  const std::vector<double>& leaf_for(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf())
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[i].column)] <= nodes[i].threshold
                                       ? nodes[i].left
                                       : nodes[i].right);
    return nodes[i].distribution;
  }
  friend bool operator==(const Tree&, const Tree&) = default;
};

struct ForestOptions {
  std::size_t n_estimators = 100;
  std::optional<std::size_t> max_depth;  ///< unlimited when empty
  std::size_t min_samples_split = 2;
  std::size_t max_features = 0;          ///< 0 means ceil(sqrt(p))
  bool bootstrap = true;
};

struct ForestState {
  std::size_t n_classes = 0;
  std::vector<Tree> trees;
  friend bool operator==(const ForestState&, const ForestState&) = default;
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(std::span<const double> X, std::size_t n_cols, std::span<const std::size_t> y,
              std::size_t n_classes, const ForestOptions& opt, Rng& rng)
      : X_(X), n_cols_(n_cols), y_(y), n_classes_(n_classes), opt_(opt), rng_(rng) {}

  Tree build(std::vector<std::size_t> samples) {
    Tree tree;
    grow(tree, std::move(samples), 0);
    return tree;
  }

 private:
  struct Best {
    double impurity = INFINITY;
    int column = -1;
    double threshold = 0.0;
  };

  std::vector<double> counts(std::span<const std::size_t> samples) const {
    std::vector<double> c(n_classes_, 0.0);
    for (std::size_t s : samples) c[y_[s]] += 1.0;
    return c;
  }

  static double gini(std::span<const double> c, double n) {
    double sum_sq = 0.0;
    for (double x : c) sum_sq += x * x;
    return 1.0 - sum_sq / (n * n);
  }

  void try_column(std::span<const std::size_t> samples, std::size_t col, Best& best) const {
    std::vector<std::size_t> sorted(samples.begin(), samples.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [&](std::size_t a, std::size_t b) { return X_[a * n_cols_ + col] < X_[b * n_cols_ + col]; });
    const auto n = static_cast<double>(sorted.size());
    std::vector<double> left(n_classes_, 0.0), right = counts(sorted);
    for (std::size_t i = 1; i < sorted.size(); ++i) {
      const std::size_t moved = y_[sorted[i - 1]];
      left[moved] += 1.0;
      right[moved] -= 1.0;
      const double lo = X_[sorted[i - 1] * n_cols_ + col];
      const double hi = X_[sorted[i] * n_cols_ + col];
      if (!(hi > lo)) continue;
      const auto nl = static_cast<double>(i);
      const double nr = n - nl;
      const double impurity = (nl * gini(left, nl) + nr * gini(right, nr)) / n;
      if (impurity < best.impurity) {
        double mid = lo + (hi - lo) / 2.0;
        if (!(mid < hi)) mid = lo;
        best = Best{impurity, static_cast<int>(col), mid};
      }
    }
  }

  int grow(Tree& tree, std::vector<std::size_t> samples, std::size_t depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const std::vector<double> c = counts(samples);
    const bool pure = std::count_if(c.begin(), c.end(), [](double x) { return x > 0.0; }) <= 1;
    const bool too_deep = opt_.max_depth && depth >= *opt_.max_depth;

    Best best;
    if (!pure && !too_deep && samples.size() >= opt_.min_samples_split) {
      std::vector<std::size_t> cols(n_cols_);
      for (std::size_t i = 0; i < n_cols_; ++i) cols[i] = i;
      rng_.shuffle(std::span(cols));
      const std::size_t wanted =
          opt_.max_features ? std::min(opt_.max_features, n_cols_)
                            : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_cols_))));
      for (std::size_t i = 0; i < cols.size(); ++i) {
        if (i >= wanted && best.column >= 0) break;
        try_column(samples, cols[i], best);
      }
    }

    if (best.column < 0) {
      const auto n = static_cast<double>(samples.size());
      TreeNode& leaf = tree.nodes[static_cast<std::size_t>(id)];
      leaf.distribution = c;
      for (double& x : leaf.distribution) x /= n;
      return id;
    }

    std::vector<std::size_t> left, right;
    const auto col = static_cast<std::size_t>(best.column);
    for (std::size_t s : samples) (X_[s * n_cols_ + col] <= best.threshold ? left : right).push_back(s);
    samples.clear();
    samples.shrink_to_fit();
    const int l = grow(tree, std::move(left), depth + 1);
    const int r = grow(tree, std::move(right), depth + 1);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    node.column = best.column;
    node.threshold = best.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  std::span<const double> X_;
  std::size_t n_cols_;
  std::span<const std::size_t> y_;
  std::size_t n_classes_;
  const ForestOptions& opt_;
  Rng& rng_;
};

}  // namespace detail

inline ForestState fit_forest(std::span<const double> X, std::size_t n_cols, std::span<const std::size_t> y,
                              std::size_t n_classes, const ForestOptions& opt, std::uint64_t seed) {
  if (y.empty()) throw ValidationError("cannot fit a forest on zero rows");
  if (opt.n_estimators < 1) throw ValidationError("n_estimators must be ≥ 1");
  if (opt.min_samples_split < 2) throw ValidationError("min_samples_split must be ≥ 2");
  ForestState forest;
  forest.n_classes = n_classes;
  forest.trees.reserve(opt.n_estimators);
  const std::size_t n = y.size();
  for (std::size_t t = 0; t < opt.n_estimators; ++t) {
    Rng rng(derive_seed(seed, 1000 + t));
    std::vector<std::size_t> samples(n);
    for (std::size_t i = 0; i < n; ++i) samples[i] = opt.bootstrap ? static_cast<std::size_t>(rng.below(n)) : i;
    std::sort(samples.begin(), samples.end());
    forest.trees.push_back(detail::TreeBuilder(X, n_cols, y, n_classes, opt, rng).build(std::move(samples)));
  }
  return forest;
}

/// Mean of the per-tree leaf distributions.
inline std::vector<double> forest_probabilities(const ForestState& f, std::span<const double> x) {
  std::vector<double> p(f.n_classes, 0.0);
  for (const auto& tree : f.trees) {
    const auto& leaf = tree.leaf_for(x);
    for (std::size_t k = 0; k < p.size(); ++k) p[k] += leaf[k];
  }
  for (double& v : p) v /= static_cast<double>(f.trees.size());
  return p;
}

}  // namespace cesium::learn
