#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "cesium/error.hpp"

namespace cesium::learn {

/// Exact k-nearest-neighbour classifier over a stored training matrix.
/// Distance ties go to the lower training row; vote ties to the lower class.
struct KnnState {
  std::size_t n_neighbors = 5;
  std::size_t n_cols = 0;
  std::vector<double> X;            ///< row-major training matrix
  std::vector<std::size_t> labels;  ///< class index per training row

  std::size_t n_rows() const { return labels.size(); }

  friend bool operator==(const KnnState&, const KnnState&) = default;
};

inline KnnState fit_knn(std::span<const double> X, std::size_t n_cols, std::span<const std::size_t> labels,
                        std::size_t n_neighbors) {
  if (n_neighbors < 1) throw ValidationError("n_neighbors must be ≥ 1");
  if (labels.empty()) throw ValidationError("cannot fit k-NN on zero rows");
  return KnnState{n_neighbors, n_cols, std::vector<double>(X.begin(), X.end()),
                  std::vector<std::size_t>(labels.begin(), labels.end())};
}

/// Vote fractions per class; k is capped at the training row count.
inline std::vector<double> knn_probabilities(const KnnState& m, std::span<const double> x,
                                             std::size_t n_classes) {
  const std::size_t n = m.n_rows();
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t r = 0; r < n; ++r) {
    double d = 0.0;
    for (std::size_t c = 0; c < m.n_cols; ++c) {
      const double diff = m.X[r * m.n_cols + c] - x[c];
      d += diff * diff;
    }
    dist[r] = {d, r};
  }
  const std::size_t k = std::min(m.n_neighbors, n);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::vector<double> votes(n_classes, 0.0);
  for (std::size_t i = 0; i < k; ++i) votes[m.labels[dist[i].second]] += 1.0;
  for (double& v : votes) v /= static_cast<double>(k);
  return votes;
}

}  // namespace cesium::learn
