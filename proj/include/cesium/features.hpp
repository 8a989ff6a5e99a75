#pragma once

// Builtin feature catalog expressed as graph node definitions.
//
// Features that build on each other share nodes: amplitude reuses maximum
// and minimum, the dispersion features reuse mean or median, and every
// freq{l}_* feature reads the single "lomb_scargle_model" node.

#include <string>
#include <vector>

#include "cesium/graph.hpp"
#include "cesium/lomb_scargle.hpp"
#include "cesium/stats.hpp"

namespace cesium {

/// Tunable parameters of the builtin catalog.
struct FeatureParams {
  std::size_t ls_n_freq = 1;     ///< frequencies fitted by prewhitening
  std::size_t ls_n_harm = 4;     ///< harmonics per frequency
  double ls_oversample = 5.0;    ///< grid points per sample
  double median_window = 0.1;    ///< percent_close_to_median half-width, fraction of range

  void validate() const {
    if (ls_n_freq < 1 || ls_n_harm < 1) throw ValidationError("ls_n_freq and ls_n_harm must be ≥ 1");
    if (!(ls_oversample > 0.0)) throw ValidationError("ls_oversample must be > 0");
    if (!(median_window >= 0.0)) throw ValidationError("median_window must be ≥ 0");
  }

  friend bool operator==(const FeatureParams&, const FeatureParams&) = default;
};

struct CatalogEntry {
  std::string name;
  std::string description;
  std::vector<std::string> params;  ///< FeatureParams fields the feature reads
};

inline constexpr const char* lomb_scargle_node = "lomb_scargle_model";

namespace detail {

inline Value scalar_node(double x) { return Value{x}; }

inline std::vector<std::string> lomb_scargle_feature_names(const FeatureParams& p) {
  std::vector<std::string> names;
  for (std::size_t l = 1; l <= p.ls_n_freq; ++l) {
    const std::string prefix = "freq" + std::to_string(l) + "_";
    names.push_back(prefix + "freq");
    names.push_back(prefix + "signif");
    for (std::size_t k = 1; k <= p.ls_n_harm; ++k) {
      names.push_back(prefix + "amplitude" + std::to_string(k));
      names.push_back(prefix + "rel_phase" + std::to_string(k));
    }
  }
  return names;
}

}  // namespace detail

/// Names of the summary-statistic features (no Lomb-Scargle family).
inline std::vector<std::string> summary_feature_names() {
  return {"abs_diffs",
          "amplitude",
          "max_slope",
          "maximum",
          "mean",
          "mean2",
          "median",
          "median_absolute_deviation",
          "minimum",
          "n_epochs",
          "percent_beyond_1_std",
          "percent_close_to_median",
          "skew",
          "std",
          "weighted_average",
          "weighted_std_dev"};
}

/// Every builtin feature with its description, in listing order.
inline std::vector<CatalogEntry> feature_catalog(const FeatureParams& p = {}) {
  std::vector<CatalogEntry> out = {
      {"abs_diffs", "sum of absolute differences between consecutive values", {}},
      {"amplitude", "half the range: (max - min) / 2", {}},
      {"max_slope", "largest |dv/dt| between consecutive samples", {}},
      {"maximum", "largest value", {}},
      {"mean", "arithmetic mean", {}},
      {"mean2", "mean of squared values", {}},
      {"median", "median value", {}},
      {"median_absolute_deviation", "median of |v - median(v)|", {}},
      {"minimum", "smallest value", {}},
      {"n_epochs", "number of samples", {}},
      {"percent_beyond_1_std", "fraction of samples farther than one std from the mean", {}},
      {"percent_close_to_median",
       "fraction of samples within median_window * (max - min) of the median",
       {"median_window"}},
      {"skew", "population skewness (third standardized moment)", {}},
      {"std", "population standard deviation", {}},
      {"weighted_average", "inverse-variance weighted mean (mean without errors)", {}},
      {"weighted_std_dev", "inverse-variance weighted standard deviation (std without errors)", {}},
  };
  const std::vector<std::string> ls_params = {"ls_n_freq", "ls_n_harm", "ls_oversample"};
  for (const auto& name : detail::lomb_scargle_feature_names(p)) {
    std::string what;
    if (name.ends_with("_freq")) what = "best-fit frequency of this prewhitening stage";
    else if (name.ends_with("_signif")) what = "fraction of remaining weighted RSS removed by this stage";
    else if (name.find("amplitude") != std::string::npos) what = "harmonic amplitude sqrt(A^2 + B^2)";
    else what = "harmonic phase relative to the first harmonic, in (-pi, pi]";
    out.push_back({name, "Lomb-Scargle: " + what, ls_params});
  }
  return out;
}

/// Graph node definitions for the whole builtin catalog plus shared
/// intermediates.
inline NodeDefs builtin_features(const FeatureParams& p = {}) {
  p.validate();
  using namespace node_ids;
  NodeDefs d;
  auto add = [&d](std::string name, std::vector<std::string> deps, EvalFn fn) {
    d.emplace(std::move(name), NodeDef{std::move(deps), std::move(fn), {}});
  };

  add("mean", {values}, [](const NodeArgs& a) { return Value{stats::mean(a.array(0))}; });
  add("std", {values, "mean"},
      [](const NodeArgs& a) { return Value{stats::std_dev(a.array(0), a.scalar(1))}; });
  add("mean2", {values}, [](const NodeArgs& a) { return Value{stats::mean_square(a.array(0))}; });
  add("skew", {values, "mean"},
      [](const NodeArgs& a) { return Value{stats::skew(a.array(0), a.scalar(1))}; });
  add("abs_diffs", {values}, [](const NodeArgs& a) { return Value{stats::abs_diffs(a.array(0))}; });
  add("maximum", {values}, [](const NodeArgs& a) { return Value{stats::maximum(a.array(0))}; });
  add("minimum", {values}, [](const NodeArgs& a) { return Value{stats::minimum(a.array(0))}; });
  add("median", {values}, [](const NodeArgs& a) { return Value{stats::median(a.array(0))}; });
  add("amplitude", {"maximum", "minimum"},
      [](const NodeArgs& a) { return Value{(a.scalar(0) - a.scalar(1)) / 2.0}; });
  add("median_absolute_deviation", {values, "median"}, [](const NodeArgs& a) {
    return Value{stats::median_absolute_deviation(a.array(0), a.scalar(1))};
  });
  add("max_slope", {times, values},
      [](const NodeArgs& a) { return Value{stats::max_slope(a.array(0), a.array(1))}; });
  add("percent_beyond_1_std", {values, "mean", "std"}, [](const NodeArgs& a) {
    return Value{stats::percent_beyond_1_std(a.array(0), a.scalar(1), a.scalar(2))};
  });
  add("percent_close_to_median", {values, "median", "maximum", "minimum"},
      [window = p.median_window](const NodeArgs& a) {
        return Value{stats::percent_close_to_median(a.array(0), a.scalar(1), a.scalar(2),
                                                    a.scalar(3), window)};
      });
  add("weighted_average", {values, errors},
      [](const NodeArgs& a) { return Value{stats::weighted_average(a.array(0), a.array(1))}; });
  add("weighted_std_dev", {values, errors, "weighted_average"}, [](const NodeArgs& a) {
    return Value{stats::weighted_std_dev(a.array(0), a.array(1), a.scalar(2))};
  });
  add("n_epochs", {values},
      [](const NodeArgs& a) { return Value{static_cast<double>(a.array(0).size())}; });

  add(lomb_scargle_node, {times, values, errors}, [p](const NodeArgs& a) {
    ChannelData ch;
    ch.times.assign(a.array(0).begin(), a.array(0).end());
    ch.values.assign(a.array(1).begin(), a.array(1).end());
    ch.errors.assign(a.array(2).begin(), a.array(2).end());
    const auto grid = FrequencyGrid::for_times(ch.times, p.ls_oversample);
    return make_object_value(fit_lomb_scargle(ch, p.ls_n_freq, p.ls_n_harm, grid));
  });
  for (const auto& name : detail::lomb_scargle_feature_names(p)) {
    add(name, {lomb_scargle_node}, [name](const NodeArgs& a) {
      for (const auto& [key, value] : lomb_scargle_features(a.object<LombScargleModel>(0)))
        if (key == name) return Value{value};
      throw ValidationError("model has no feature " + name);
    });
  }

  for (const auto& entry : feature_catalog(p)) {
    if (auto it = d.find(entry.name); it != d.end()) it->second.description = entry.description;
  }
  d.at(lomb_scargle_node).description = "fitted multi-harmonic Lomb-Scargle model (intermediate)";
  return d;
}

/// build_graph against the builtin catalog.
inline FeatureGraph build_feature_graph(const std::vector<std::string>& requested,
                                        const NodeDefs& custom = {}, const FeatureParams& p = {}) {
  return build_graph(requested, custom, builtin_features(p));
}

}  // namespace cesium
