#pragma once

// Domain types shared by every module: channels, time series, feature sets.
//
// All types are plain values. Once built they are not mutated by library
// code, so they can be shared freely between worker threads.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cesium/error.hpp"

namespace cesium {

using MetaValue = std::variant<std::string, double>;
using Metadata = std::map<std::string, MetaValue>;

/// One dimension of a time series. An empty `times` vector means the implicit
/// grid 0, 1, 2, ...; an empty `errors` vector means no measurement errors.
struct ChannelData {
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> errors;

  bool has_times() const { return !times.empty(); }
  bool has_errors() const { return !errors.empty(); }
  std::size_t size() const { return values.size(); }

  /// Sample times with the implicit grid materialized.
  std::vector<double> resolved_times() const {
    if (has_times()) return times;
    std::vector<double> grid(values.size());
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = static_cast<double>(i);
    return grid;
  }

  friend bool operator==(const ChannelData&, const ChannelData&) = default;
};

struct TimeSeries {
  std::string name;
  std::vector<ChannelData> channels;
  std::optional<std::string> target;
  Metadata metadata;

  std::size_t n_channels() const { return channels.size(); }

  friend bool operator==(const TimeSeries&, const TimeSeries&) = default;
};

/// Appends every invariant violation of `ch` to `out`, each prefixed by `where`.
inline void collect_channel_violations(const ChannelData& ch, const std::string& where,
                                       std::vector<std::string>& out) {
  const std::size_t n = ch.values.size();
  if (n == 0) {
    out.push_back(where + "values must be non-empty");
  }
  for (double v : ch.values) {
    if (!std::isfinite(v)) {
      out.push_back(where + "values must be finite");
      break;
    }
  }
  if (ch.has_times()) {
    if (ch.times.size() != n) {
      out.push_back(where + "times length " + std::to_string(ch.times.size()) +
                    " differs from values length " + std::to_string(n));
    }
    bool finite = true;
    for (double t : ch.times) finite = finite && std::isfinite(t);
    if (!finite) out.push_back(where + "times must be finite");
    for (std::size_t i = 1; i < ch.times.size(); ++i) {
      if (!(ch.times[i] > ch.times[i - 1])) {
        out.push_back(where + "times not strictly increasing");
        break;
      }
    }
  }
  if (ch.has_errors()) {
    if (ch.errors.size() != n) {
      out.push_back(where + "errors length " + std::to_string(ch.errors.size()) +
                    " differs from values length " + std::to_string(n));
    }
    for (double e : ch.errors) {
      if (!std::isfinite(e)) {
        out.push_back(where + "errors must be finite");
        break;
      }
    }
    for (double e : ch.errors) {
      if (!(e > 0.0)) {
        out.push_back(where + "errors must be > 0");
        break;
      }
    }
  }
}

/// Returns every invariant violation; an empty list means the series is valid.
inline std::vector<std::string> validate_time_series(const TimeSeries& ts) {
  std::vector<std::string> out;
  if (ts.name.empty()) out.push_back("name must be non-empty");
  if (ts.channels.empty()) out.push_back("channel list must be non-empty");
  for (std::size_t c = 0; c < ts.channels.size(); ++c) {
    const std::string where =
        ts.channels.size() == 1 ? std::string{} : "channel " + std::to_string(c) + ": ";
    collect_channel_violations(ts.channels[c], where, out);
  }
  return out;
}

inline std::vector<std::string> validate_channel(const ChannelData& ch) {
  std::vector<std::string> out;
  collect_channel_violations(ch, {}, out);
  return out;
}

/// Series x channel x feature table. NaN marks a value that was not computed.
class FeatureSet {
 public:
  FeatureSet() = default;

  FeatureSet(std::vector<std::string> series_names, std::size_t n_channels,
             std::vector<std::string> feature_names)
      : series_names_(std::move(series_names)),
        n_channels_(n_channels),
        feature_names_(std::move(feature_names)),
        values_(series_names_.size() * n_channels_ * feature_names_.size(),
                std::numeric_limits<double>::quiet_NaN()),
        targets_(series_names_.size()),
        metadata_(series_names_.size()) {
    check_unique(series_names_, "series name");
    check_unique(feature_names_, "feature name");
    if (n_channels_ == 0) throw ValidationError("feature set needs at least one channel");
  }

  std::size_t n_series() const { return series_names_.size(); }
  std::size_t n_channels() const { return n_channels_; }
  std::size_t n_features() const { return feature_names_.size(); }

  const std::vector<std::string>& series_names() const { return series_names_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }

  std::size_t index(std::size_t series, std::size_t channel, std::size_t feature) const {
    return (series * n_channels_ + channel) * feature_names_.size() + feature;
  }
  double at(std::size_t series, std::size_t channel, std::size_t feature) const {
    return values_[index(series, channel, feature)];
  }
  double& at(std::size_t series, std::size_t channel, std::size_t feature) {
    return values_[index(series, channel, feature)];
  }

  /// Row-major [series][channel][feature] payload.
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  const std::optional<std::string>& target(std::size_t series) const { return targets_[series]; }
  void set_target(std::size_t series, std::optional<std::string> label) {
    targets_[series] = std::move(label);
  }
  const std::vector<std::optional<std::string>>& targets() const { return targets_; }

  const Metadata& metadata(std::size_t series) const { return metadata_[series]; }
  void set_metadata(std::size_t series, Metadata meta) { metadata_[series] = std::move(meta); }

  std::optional<std::size_t> feature_index(const std::string& name) const {
    for (std::size_t i = 0; i < feature_names_.size(); ++i)
      if (feature_names_[i] == name) return i;
    return std::nullopt;
  }

  bool row_has_nan(std::size_t series) const {
    const std::size_t width = n_channels_ * feature_names_.size();
    for (std::size_t k = 0; k < width; ++k)
      if (std::isnan(values_[series * width + k])) return true;
    return false;
  }

  /// Structural equality with doubles compared by bit pattern (NaN == NaN).
  friend bool bitwise_equal(const FeatureSet& a, const FeatureSet& b) {
    if (a.series_names_ != b.series_names_ || a.n_channels_ != b.n_channels_ ||
        a.feature_names_ != b.feature_names_ || a.targets_ != b.targets_ ||
        a.metadata_ != b.metadata_ || a.values_.size() != b.values_.size())
      return false;
    return a.values_.empty() ||
           std::memcmp(a.values_.data(), b.values_.data(), a.values_.size() * sizeof(double)) == 0;
  }

 private:
  static void check_unique(const std::vector<std::string>& names, const char* what) {
    std::set<std::string> seen;
    for (const auto& n : names)
      if (!seen.insert(n).second) throw ValidationError(std::string("duplicate ") + what + ": " + n);
  }

  std::vector<std::string> series_names_;
  std::size_t n_channels_ = 0;
  std::vector<std::string> feature_names_;
  std::vector<double> values_;
  std::vector<std::optional<std::string>> targets_;
  std::vector<Metadata> metadata_;
};

/// Returns every invariant violation of a feature set.
inline std::vector<std::string> validate_featureset(const FeatureSet& fs) {
  std::vector<std::string> out;
  if (fs.values().size() != fs.n_series() * fs.n_channels() * fs.n_features())
    out.push_back("value array does not match dimensions");
  for (double v : fs.values()) {
    if (!std::isnan(v) && !std::isfinite(v)) {
      out.push_back("non-finite feature value");
      break;
    }
  }
  return out;
}

/// Rows of `fs` in the order given by `indices`; the other axes are unchanged.
inline FeatureSet featureset_select(const FeatureSet& fs, std::span<const std::size_t> indices) {
  std::set<std::size_t> seen;
  std::vector<std::string> names;
  names.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= fs.n_series()) throw ValidationError("index " + std::to_string(i) + " out of range");
    if (!seen.insert(i).second)
      throw ValidationError("duplicate index " + std::to_string(i));
    names.push_back(fs.series_names()[i]);
  }
  FeatureSet out(std::move(names), fs.n_channels(), fs.feature_names());
  const std::size_t width = fs.n_channels() * fs.n_features();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t src = indices[r];
    std::copy_n(fs.values().begin() + static_cast<std::ptrdiff_t>(src * width), width,
                out.values().begin() + static_cast<std::ptrdiff_t>(r * width));
    out.set_target(r, fs.target(src));
    out.set_metadata(r, fs.metadata(src));
  }
  return out;
}

inline FeatureSet featureset_select(const FeatureSet& fs, std::initializer_list<std::size_t> indices) {
  return featureset_select(fs, std::span<const std::size_t>(indices.begin(), indices.size()));
}

}  // namespace cesium
