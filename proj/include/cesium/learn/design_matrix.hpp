#pragma once

// Flattening of a (series x channel x feature) set into learner input.
// Columns are feature-major then channel; a column is named after its
// feature when there is one channel and "feature_ch{c}" otherwise.

#include <string>
#include <vector>

#include "cesium/core.hpp"

namespace cesium::learn {

inline std::vector<std::string> design_columns(const FeatureSet& fs) {
  std::vector<std::string> cols;
  cols.reserve(fs.n_features() * fs.n_channels());
  for (const auto& f : fs.feature_names()) {
    for (std::size_t c = 0; c < fs.n_channels(); ++c)
      cols.push_back(fs.n_channels() == 1 ? f : f + "_ch" + std::to_string(c));
  }
  return cols;
}

/// Row `s` of `fs` in design-column order.
inline std::vector<double> design_row(const FeatureSet& fs, std::size_t s) {
  std::vector<double> row;
  row.reserve(fs.n_features() * fs.n_channels());
  for (std::size_t f = 0; f < fs.n_features(); ++f)
    for (std::size_t c = 0; c < fs.n_channels(); ++c) row.push_back(fs.at(s, c, f));
  return row;
}

struct DesignMatrix {
  std::vector<std::string> row_names;
  std::vector<std::string> column_names;
  std::vector<double> data;  ///< row-major
  std::vector<std::optional<std::string>> targets;

  std::size_t rows() const { return row_names.size(); }
  std::size_t cols() const { return column_names.size(); }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data).subspan(r * cols(), cols());
  }

  /// Rejects feature sets with NaN cells, naming the offending series.
  static DesignMatrix from_featureset(const FeatureSet& fs) {
    std::vector<std::string> bad;
    for (std::size_t s = 0; s < fs.n_series(); ++s)
      if (fs.row_has_nan(s)) bad.push_back(fs.series_names()[s]);
    if (!bad.empty()) {
      std::string msg = "feature set has NaN values for series:";
      for (const auto& b : bad) msg += " " + b;
      throw ValidationError(msg);
    }
    DesignMatrix m;
    m.row_names = fs.series_names();
    m.column_names = design_columns(fs);
    m.targets = fs.targets();
    m.data.reserve(fs.n_series() * m.column_names.size());
    for (std::size_t s = 0; s < fs.n_series(); ++s) {
      const auto r = design_row(fs, s);
      m.data.insert(m.data.end(), r.begin(), r.end());
    }
    return m;
  }
};

}  // namespace cesium::learn
