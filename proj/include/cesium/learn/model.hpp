#pragma once

// Model building and prediction on feature sets.
//
// Hyperparameters are numbers. k-NN: n_neighbors (default 5).
// random_forest: n_estimators (100), max_depth (-1 = unlimited),
// min_samples_split (2), max_features (0 = ceil(sqrt(p))), bootstrap (1).
// A grid is expanded as a cartesian product with keys in lexicographic order
// and the last key varying fastest; the first best grid point wins.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "cesium/core.hpp"
#include "cesium/featurize.hpp"
#include "cesium/learn/design_matrix.hpp"
#include "cesium/learn/forest.hpp"
#include "cesium/learn/knn.hpp"
#include "cesium/learn/split.hpp"

namespace cesium::learn {

enum class LearnerKind { knn, random_forest };

inline std::string to_string(LearnerKind k) { return k == LearnerKind::knn ? "knn" : "random_forest"; }

inline LearnerKind learner_kind_from_string(const std::string& s) {
  if (s == "knn") return LearnerKind::knn;
  if (s == "random_forest") return LearnerKind::random_forest;
  throw ValidationError("unknown learner: " + s + " (expected knn or random_forest)");
}

using ParamMap = std::map<std::string, double>;
using ParamGrid = std::map<std::string, std::vector<double>>;

struct LearnerSpec {
  LearnerKind kind = LearnerKind::knn;
  ParamMap params;
  ParamGrid param_grid;
  std::size_t cv_folds = 5;
  std::uint64_t seed = 0;

  friend bool operator==(const LearnerSpec&, const LearnerSpec&) = default;
};

inline ParamMap default_params(LearnerKind kind) {
  if (kind == LearnerKind::knn) return {{"n_neighbors", 5}};
  return {{"n_estimators", 100}, {"max_depth", -1}, {"min_samples_split", 2}, {"max_features", 0},
          {"bootstrap", 1}};
}

namespace detail {

inline std::size_t as_count(const ParamMap& p, const std::string& key, double min) {
  const double v = p.at(key);
  if (!(v >= min) || v != std::floor(v) || v > 1e9)
    throw ValidationError(key + " must be an integer ≥ " + std::to_string(static_cast<long long>(min)));
  return static_cast<std::size_t>(v);
}

}  // namespace detail

/// Defaults overlaid with `params`; rejects unknown names and bad values.
inline ParamMap resolve_params(LearnerKind kind, const ParamMap& params) {
  ParamMap out = default_params(kind);
  for (const auto& [key, value] : params) {
    if (!out.count(key)) throw ValidationError("unknown hyperparameter for " + to_string(kind) + ": " + key);
    out[key] = value;
  }
  if (kind == LearnerKind::knn) {
    detail::as_count(out, "n_neighbors", 1);
  } else {
    detail::as_count(out, "n_estimators", 1);
    if (out.at("max_depth") != -1.0) detail::as_count(out, "max_depth", 0);
    detail::as_count(out, "min_samples_split", 2);
    detail::as_count(out, "max_features", 0);
    if (out.at("bootstrap") != 0.0 && out.at("bootstrap") != 1.0)
      throw ValidationError("bootstrap must be 0 or 1");
  }
  return out;
}

inline ForestOptions forest_options(const ParamMap& p) {
  ForestOptions o;
  o.n_estimators = static_cast<std::size_t>(p.at("n_estimators"));
  if (p.at("max_depth") >= 0) o.max_depth = static_cast<std::size_t>(p.at("max_depth"));
  o.min_samples_split = static_cast<std::size_t>(p.at("min_samples_split"));
  o.max_features = static_cast<std::size_t>(p.at("max_features"));
  o.bootstrap = p.at("bootstrap") != 0.0;
  return o;
}

/// Grid points in evaluation order; a single point (`params`) when the grid is empty.
inline std::vector<ParamMap> expand_grid(const ParamMap& params, const ParamGrid& grid) {
  std::vector<ParamMap> points{params};
  for (const auto& [key, values] : grid) {
    if (values.empty()) throw ValidationError("grid for " + key + " is empty");
    std::vector<ParamMap> next;
    for (const auto& p : points)
      for (double v : values) {
        ParamMap q = p;
        q[key] = v;
        next.push_back(std::move(q));
      }
    points = std::move(next);
  }
  return points;
}

struct CvResult {
  ParamMap params;
  double mean_accuracy = 0.0;
  friend bool operator==(const CvResult&, const CvResult&) = default;
};

struct TrainedModel {
  LearnerSpec spec;                  ///< `params` holds the chosen, fully resolved values
  std::vector<std::string> classes;  ///< sorted label vocabulary
  std::vector<std::string> layout;   ///< design-matrix columns the model expects
  std::variant<KnnState, ForestState> state;
  std::vector<CvResult> cv_results;  ///< empty when no grid was searched

  friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

namespace detail {

using FittedState = std::variant<KnnState, ForestState>;

inline FittedState fit_state(LearnerKind kind, const ParamMap& p, std::span<const double> X, std::size_t cols,
                             std::span<const std::size_t> y, std::size_t n_classes, std::uint64_t seed) {
  if (kind == LearnerKind::knn) return fit_knn(X, cols, y, static_cast<std::size_t>(p.at("n_neighbors")));
  return fit_forest(X, cols, y, n_classes, forest_options(p), seed);
}

inline std::vector<double> probabilities(const FittedState& s, std::span<const double> x, std::size_t n_classes) {
  if (const auto* knn = std::get_if<KnnState>(&s)) return knn_probabilities(*knn, x, n_classes);
  return forest_probabilities(std::get<ForestState>(s), x);
}

/// Index of the largest probability; ties go to the lower class index.
inline std::size_t argmax(const std::vector<double>& p) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < p.size(); ++k)
    if (p[k] > p[best]) best = k;
  return best;
}

}  // namespace detail

/// Fits a learner on a labelled feature set, choosing hyperparameters from
/// `spec.param_grid` by stratified k-fold cross-validated accuracy.
inline TrainedModel model_from_featureset(const FeatureSet& fs, const LearnerSpec& spec) {
  const DesignMatrix dm = DesignMatrix::from_featureset(fs);
  std::vector<std::string> labels;
  for (std::size_t r = 0; r < dm.rows(); ++r) {
    if (!dm.targets[r]) throw ValidationError("series '" + dm.row_names[r] + "' has no target");
    labels.push_back(*dm.targets[r]);
  }
  if (labels.empty()) throw ValidationError("cannot train on an empty feature set");

  TrainedModel model;
  const std::set<std::string> vocab(labels.begin(), labels.end());
  model.classes.assign(vocab.begin(), vocab.end());
  model.layout = dm.column_names;
  std::vector<std::size_t> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    y[i] = static_cast<std::size_t>(std::lower_bound(model.classes.begin(), model.classes.end(), labels[i]) -
                                    model.classes.begin());

  for (const auto& [key, values] : spec.param_grid) {
    for (double v : values) resolve_params(spec.kind, {{key, v}});
  }
  const ParamMap base = resolve_params(spec.kind, spec.params);
  const std::vector<ParamMap> points = expand_grid(base, spec.param_grid);
  const std::size_t K = model.classes.size();
  const std::size_t cols = dm.cols();

  ParamMap chosen = points.front();
  if (!spec.param_grid.empty()) {
    const auto folds = stratified_folds(labels, spec.cv_folds, spec.seed);
    double best = -1.0;
    for (const auto& p : points) {
      double total = 0.0;
      for (std::size_t f = 0; f < spec.cv_folds; ++f) {
        std::vector<double> Xtr;
        std::vector<std::size_t> ytr, test_rows;
        for (std::size_t r = 0; r < dm.rows(); ++r) {
          if (folds[r] == f) {
            test_rows.push_back(r);
          } else {
            const auto row = dm.row(r);
            Xtr.insert(Xtr.end(), row.begin(), row.end());
            ytr.push_back(y[r]);
          }
        }
        const auto state = detail::fit_state(spec.kind, p, Xtr, cols, ytr, K, spec.seed);
        std::size_t correct = 0;
        for (std::size_t r : test_rows)
          if (detail::argmax(detail::probabilities(state, dm.row(r), K)) == y[r]) ++correct;
        total += test_rows.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test_rows.size());
      }
      const double acc = total / static_cast<double>(spec.cv_folds);
      model.cv_results.push_back({p, acc});
      if (acc > best) {
        best = acc;
        chosen = p;
      }
    }
  }

  model.spec = spec;
  model.spec.params = chosen;
  model.state = detail::fit_state(spec.kind, chosen, dm.data, cols, y, K, spec.seed);
  return model;
}

struct Prediction {
  std::string name;
  std::optional<std::string> label;  ///< empty when the row could not be predicted
  std::vector<double> probabilities;  ///< per class, only when requested
  std::string problem;                ///< why the row is unpredictable
};

inline void check_layout(const std::vector<std::string>& expected, const std::vector<std::string>& actual) {
  if (expected == actual) return;
  const std::set<std::string> want(expected.begin(), expected.end()), have(actual.begin(), actual.end());
  std::string missing, extra;
  for (const auto& c : expected)
    if (!have.count(c)) missing += (missing.empty() ? "" : ", ") + c;
  for (const auto& c : actual)
    if (!want.count(c)) extra += (extra.empty() ? "" : ", ") + c;
  std::string msg = "feature layout does not match model";
  if (!missing.empty()) msg += "; missing columns: " + missing;
  if (!extra.empty()) msg += "; extra columns: " + extra;
  if (missing.empty() && extra.empty()) msg += "; columns are in a different order";
  throw ValidationError(msg);
}

/// Predicts every row of `fs`. Rows with NaN features are returned
/// unpredictable instead of being dropped.
inline std::vector<Prediction> model_predictions(const FeatureSet& fs, const TrainedModel& model,
                                                 bool return_probs = false) {
  check_layout(model.layout, design_columns(fs));
  const std::size_t K = model.classes.size();
  std::vector<Prediction> out;
  out.reserve(fs.n_series());
  for (std::size_t s = 0; s < fs.n_series(); ++s) {
    Prediction p;
    p.name = fs.series_names()[s];
    if (fs.row_has_nan(s)) {
      p.problem = "feature values missing";
    } else {
      auto probs = detail::probabilities(model.state, design_row(fs, s), K);
      p.label = model.classes[detail::argmax(probs)];
      if (return_probs) p.probabilities = std::move(probs);
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// featurize_data_files followed by model_predictions. Unreadable files
/// come back unpredictable with the read error as the reason.
inline std::vector<Prediction> predict_data_files(const std::vector<std::filesystem::path>& paths,
                                                  const TrainedModel& model, const FeaturizeRequest& req,
                                                  bool return_probs = false,
                                                  FeaturizeDiagnostics* diag = nullptr) {
  FeaturizeDiagnostics local;
  const FeatureSet fs = featurize_data_files(paths, req, {}, &local);
  auto preds = model_predictions(fs, model, return_probs);
  for (const auto& err : local.file_errors)
    for (std::size_t i = 0; i < paths.size(); ++i)
      if (paths[i].string() == err.path) preds[i].problem = err.message;
  if (diag) {
    diag->warnings.insert(diag->warnings.end(), local.warnings.begin(), local.warnings.end());
    diag->file_errors.insert(diag->file_errors.end(), local.file_errors.begin(), local.file_errors.end());
  }
  return preds;
}

inline double accuracy(const std::vector<Prediction>& preds, const FeatureSet& truth) {
  if (preds.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i].label && truth.target(i) && *preds[i].label == *truth.target(i)) ++correct;
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

}  // namespace cesium::learn
