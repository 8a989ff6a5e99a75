#pragma once

// File-to-file workflow steps shared by the CLI, the service and recipe
// replay, so the three always produce the same bytes for the same request.
//
// Parameter files are flat JSON objects. Feature parameters use the
// FeatureParams field names. A learner grid file maps hyperparameter names to
// either a number (fixed value) or an array (values to search).

#include <algorithm>
#include <filesystem>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <json.hpp>

#include "cesium/featurize.hpp"
#include "cesium/learn/model.hpp"
#include "cesium/persist/featureset_io.hpp"
#include "cesium/persist/hash.hpp"
#include "cesium/persist/model_io.hpp"
#include "cesium/persist/predictions_io.hpp"

namespace cesium::workflow {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline json feature_params_to_json(const FeatureParams& p) {
  return {{"ls_n_freq", p.ls_n_freq},
          {"ls_n_harm", p.ls_n_harm},
          {"ls_oversample", p.ls_oversample},
          {"median_window", p.median_window}};
}

inline FeatureParams feature_params_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("feature parameters must be a JSON object");
  FeatureParams p;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number()) throw ValidationError("feature parameter " + key + " must be a number");
    const double x = value.get<double>();
    auto count = [&] {
      if (x < 1 || x != std::floor(x) || x > 1e6) throw ValidationError(key + " must be a positive integer");
      return static_cast<std::size_t>(x);
    };
    if (key == "ls_n_freq") p.ls_n_freq = count();
    else if (key == "ls_n_harm") p.ls_n_harm = count();
    else if (key == "ls_oversample") p.ls_oversample = x;
    else if (key == "median_window") p.median_window = x;
    else throw ValidationError("unknown feature parameter: " + key);
  }
  p.validate();
  return p;
}

/// Builds a learner spec from a grid file's contents (may be null).
inline learn::LearnerSpec learner_spec(const std::string& learner, const json& grid, std::size_t cv_folds,
                                       std::uint64_t seed) {
  learn::LearnerSpec spec;
  spec.kind = learn::learner_kind_from_string(learner);
  spec.cv_folds = cv_folds;
  spec.seed = seed;
  if (grid.is_null()) return spec;
  if (!grid.is_object()) throw ValidationError("grid must be a JSON object");
  for (const auto& [key, value] : grid.items()) {
    if (value.is_number()) {
      spec.params[key] = value.get<double>();
    } else if (value.is_array()) {
      std::vector<double> values;
      for (const auto& v : value) {
        if (!v.is_number()) throw ValidationError("grid values for " + key + " must be numbers");
        values.push_back(v.get<double>());
      }
      spec.param_grid[key] = std::move(values);
    } else {
      throw ValidationError("grid entry " + key + " must be a number or an array of numbers");
    }
  }
  return spec;
}

inline json read_json_file(const fs::path& path) {
  const std::string text = persist::read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": invalid JSON: " + e.what());
  }
}

/// Files named on the command line; a directory contributes its *.csv files
/// in name order.
inline std::vector<fs::path> expand_inputs(const std::vector<fs::path>& args) {
  std::vector<fs::path> out;
  for (const auto& a : args) {
    if (fs::is_directory(a)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(a))
        if (e.is_regular_file() && e.path().extension() == ".csv") found.push_back(e.path());
      if (found.empty()) throw IoError("no .csv files in " + a.string());
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(a);
    }
  }
  if (out.empty()) throw ValidationError("no input files");
  return out;
}

struct Outcome {
  fs::path output;
  std::string sha256;
  std::vector<std::string> warnings;
};

namespace detail {

inline Outcome finish(const fs::path& out, const std::string& bytes, const FeaturizeDiagnostics* diag = nullptr) {
  persist::write_file(out, bytes);
  Outcome o{out, persist::sha256_hex(bytes), {}};
  if (diag) {
    for (const auto& e : diag->file_errors) o.warnings.push_back(e.path + ": " + e.message);
    o.warnings.insert(o.warnings.end(), diag->warnings.begin(), diag->warnings.end());
  }
  return o;
}

}  // namespace detail

inline Outcome featurize(const std::vector<fs::path>& inputs, const std::vector<std::string>& features,
                         const FeatureParams& params, std::size_t workers, const fs::path& out) {
  FeaturizeRequest req;
  req.features = features;
  req.params = params;
  req.parallelism = workers;
  FeaturizeDiagnostics diag;
  const FeatureSet result = featurize_data_files(inputs, req, {}, &diag);
  return detail::finish(out, persist::encode_featureset(result), &diag);
}

inline Outcome train(const fs::path& featureset, const learn::LearnerSpec& spec, const fs::path& out) {
  const FeatureSet data = persist::load_featureset(featureset);
  return detail::finish(out, persist::encode_model(learn::model_from_featureset(data, spec)));
}

inline Outcome predict_featureset(const fs::path& model_path, const fs::path& featureset, bool probs,
                                  const fs::path& out) {
  const learn::TrainedModel model = persist::load_model(model_path);
  const FeatureSet data = persist::load_featureset(featureset);
  const auto preds = learn::model_predictions(data, model, probs);
  return detail::finish(out, persist::format_predictions(preds, model.classes, probs));
}

/// Feature names behind a model's design columns ("x_ch3" -> "x" when the
/// model was trained on several channels).
inline std::vector<std::string> features_from_layout(const std::vector<std::string>& layout) {
  static const std::regex channel_suffix("^(.*)_ch[0-9]+$");
  const bool multi = !layout.empty() && std::all_of(layout.begin(), layout.end(), [](const std::string& c) {
    return std::regex_match(c, channel_suffix);
  });
  std::vector<std::string> out;
  for (const auto& c : layout) {
    std::smatch m;
    const std::string name = multi && std::regex_match(c, m, channel_suffix) ? m[1].str() : c;
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  }
  return out;
}

/// Lomb-Scargle sizes implied by the feature names; other fields default.
inline FeatureParams params_from_features(const std::vector<std::string>& features) {
  static const std::regex ls("^freq([0-9]+)_(?:freq|signif|amplitude([0-9]+)|rel_phase([0-9]+))$");
  FeatureParams p;
  std::size_t n_freq = 0, n_harm = 0;
  for (const auto& f : features) {
    std::smatch m;
    if (!std::regex_match(f, m, ls)) continue;
    n_freq = std::max<std::size_t>(n_freq, std::stoul(m[1].str()));
    for (int g : {2, 3})
      if (m[g].matched) n_harm = std::max<std::size_t>(n_harm, std::stoul(m[g].str()));
  }
  if (n_freq) p.ls_n_freq = n_freq;
  if (n_harm) p.ls_n_harm = n_harm;
  return p;
}

/// Featurizes raw files with the features the model was trained on, then
/// predicts. `params` overrides the feature parameters inferred from names.
inline Outcome predict_files(const fs::path& model_path, const std::vector<fs::path>& files,
                             const std::optional<FeatureParams>& params, bool probs, std::size_t workers,
                             const fs::path& out) {
  const learn::TrainedModel model = persist::load_model(model_path);
  FeaturizeRequest req;
  req.features = features_from_layout(model.layout);
  req.params = params ? *params : params_from_features(req.features);
  req.parallelism = workers;
  FeaturizeDiagnostics diag;
  const auto preds = learn::predict_data_files(files, model, req, probs, &diag);
  return detail::finish(out, persist::format_predictions(preds, model.classes, probs), &diag);
}

}  // namespace cesium::workflow
