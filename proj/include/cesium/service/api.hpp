#pragma once

// REST resources of the workflow service, independent of the transport.
//
// Files live under one root directory:
//   datasets/<id>/<name>.csv   featuresets/<id>.fset
//   models/<id>.model          predictions/<id>.csv
// Every job writes its file through the same workflow functions the CLI
// uses, then appends the action to the project recipe.

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cesium/features.hpp"
#include "cesium/persist/recipe.hpp"
#include "cesium/service/jobs.hpp"
#include "cesium/service/multipart.hpp"
#include "cesium/workflow.hpp"

namespace cesium::service {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct Request {
  std::string method;
  std::string target;
  std::string content_type;
  std::string body;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

class HttpError : public std::runtime_error {
 public:
  HttpError(int status, const std::string& what) : std::runtime_error(what), status(status) {}
  int status;
};

namespace detail {

inline Response json_response(int status, const json& j) { return {status, "application/json", j.dump()}; }

inline std::vector<std::string> split_path(std::string_view target) {
  if (auto q = target.find('?'); q != std::string_view::npos) target = target.substr(0, q);
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < target.size()) {
    std::size_t next = target.find('/', pos);
    if (next == std::string_view::npos) next = target.size();
    if (next > pos) out.emplace_back(target.substr(pos, next - pos));
    pos = next + 1;
  }
  return out;
}

inline json parse_body(const Request& req) {
  try {
    json j = json::parse(req.body.empty() ? "{}" : req.body);
    if (!j.is_object()) throw HttpError(400, "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw HttpError(400, std::string("invalid JSON: ") + e.what());
  }
}

inline void allow_keys(const json& body, std::initializer_list<const char*> keys) {
  for (const auto& [k, v] : body.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* allowed) { return k == allowed; }))
      throw HttpError(400, "unexpected field: " + k);
  }
}

inline std::string required_string(const json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_string()) throw HttpError(400, std::string(key) + " (string) is required");
  return body[key].get<std::string>();
}

/// Splits one CSV record, honouring double quotes.
inline std::vector<std::string> csv_record(std::string_view line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') out.back() += '"', ++i;
      else if (c == '"') quoted = false;
      else out.back() += c;
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

}  // namespace detail

class Api {
 public:
  using Notify = std::function<void(const Job&)>;

  Api(fs::path root, std::size_t workers, Notify notify)
      : root_(fs::absolute(std::move(root))), jobs_(workers, std::move(notify)) {
    fs::create_directories(root_);
  }

  const fs::path& root() const { return root_; }
  JobQueue& jobs() { return jobs_; }

  void shutdown() { jobs_.shutdown(); }

  persist::WorkflowRecipe recipe() const {
    std::lock_guard lock(mutex_);
    return recipe_;
  }

  Response handle(const Request& req) {
    try {
      return route(req);
    } catch (const HttpError& e) {
      return detail::json_response(e.status, {{"error", e.what()}});
    } catch (const ValidationError& e) {
      return detail::json_response(400, {{"error", e.what()}});
    } catch (const std::exception& e) {
      return detail::json_response(500, {{"error", e.what()}});
    }
  }

 private:
  struct Dataset {
    std::string id;
    std::vector<fs::path> files;
    std::string created;
  };
  struct Featureset {
    std::string id, dataset_id, job_id;
    std::vector<std::string> features;
    FeatureParams params;
  };
  struct Model {
    std::string id, featureset_id, job_id, learner;
    json grid;
    std::size_t cv_folds = 5;
    std::uint64_t seed = 0;
    json summary;  ///< filled in when training finishes
  };
  struct PredictionSet {
    std::string id, model_id, job_id;
    std::string source_kind;  ///< "featureset" or "dataset"
    std::string source_id;
    bool probs = false;
  };

  fs::path featureset_file(const std::string& id) const { return root_ / "featuresets" / (id + ".fset"); }
  fs::path model_file(const std::string& id) const { return root_ / "models" / (id + ".model"); }
  fs::path prediction_file(const std::string& id) const { return root_ / "predictions" / (id + ".csv"); }

  Response route(const Request& req) {
    const auto p = detail::split_path(req.target);
    const std::string& m = req.method;
    if (p.size() < 2 || p[0] != "api") throw HttpError(404, "no such route: " + req.target);
    const std::string& r = p[1];

    if (r == "datasets") {
      if (p.size() == 2 && m == "POST") return create_dataset(req);
      if (p.size() == 2 && m == "GET") return list(datasets_, [&](const Dataset& d) { return dataset_json(d); });
      if (p.size() == 3 && m == "GET") return detail::json_response(200, dataset_json(find(datasets_, p[2], "dataset")));
    } else if (r == "features") {
      if (p.size() == 2 && m == "GET") return list_features();
    } else if (r == "featuresets") {
      if (p.size() == 2 && m == "POST") return create_featureset(req);
      if (p.size() == 2 && m == "GET") return list(featuresets_, [&](const Featureset& f) { return featureset_json(f); });
      if (p.size() >= 3 && m == "GET") {
        const Featureset f = find(featuresets_, p[2], "featureset");
        if (p.size() == 3) return detail::json_response(200, featureset_json(f));
        if (p.size() == 4 && p[3] == "file") return file_response(f.job_id, featureset_file(f.id), "application/octet-stream");
      }
    } else if (r == "models") {
      if (p.size() == 2 && m == "POST") return create_model(req);
      if (p.size() == 2 && m == "GET") return list(models_, [&](const Model& x) { return model_json(x); });
      if (p.size() >= 3 && m == "GET") {
        const Model x = find(models_, p[2], "model");
        if (p.size() == 3) return detail::json_response(200, model_json(x));
        if (p.size() == 4 && p[3] == "file") return file_response(x.job_id, model_file(x.id), "application/octet-stream");
      }
    } else if (r == "predictions") {
      if (p.size() == 2 && m == "POST") return create_prediction(req);
      if (p.size() == 2 && m == "GET") return list(predictions_, [&](const PredictionSet& x) { return prediction_json(x, false); });
      if (p.size() >= 3 && m == "GET") {
        const PredictionSet x = find(predictions_, p[2], "prediction set");
        if (p.size() == 3) return detail::json_response(200, prediction_json(x, true));
        if (p.size() == 4 && p[3] == "file") return file_response(x.job_id, prediction_file(x.id), "text/csv");
      }
    } else if (r == "jobs") {
      if (p.size() == 2 && m == "GET") {
        json out = json::array();
        for (const auto& j : jobs_.list()) out.push_back(j.to_json());
        return detail::json_response(200, out);
      }
      if (p.size() == 3 && m == "GET") {
        auto job = jobs_.get(p[2]);
        if (!job) throw HttpError(404, "no such job: " + p[2]);
        return detail::json_response(200, job->to_json());
      }
    } else if (r == "projects" && p.size() >= 4 && p[3] == "recipe" && m == "GET") {
      if (p[2] != "default") throw HttpError(404, "no such project: " + p[2]);
      if (p.size() == 4) return detail::json_response(200, persist::recipe_to_json(recipe()));
      if (p.size() == 5 && p[4] == "script") return {200, "text/x-shellscript", persist::export_recipe_script(recipe())};
    }
    throw HttpError(m == "GET" || m == "POST" ? 404 : 405, "no such route: " + m + " " + req.target);
  }

  template <class T, class F>
  Response list(const std::map<std::string, T>& items, F to_json) {
    std::vector<T> copy;
    {
      std::lock_guard lock(mutex_);
      for (const auto& id : order_)
        if (auto it = items.find(id); it != items.end()) copy.push_back(it->second);
    }
    json out = json::array();
    for (const auto& x : copy) out.push_back(to_json(x));
    return detail::json_response(200, out);
  }

  template <class T>
  T find(const std::map<std::string, T>& items, const std::string& id, const char* what) const {
    std::lock_guard lock(mutex_);
    auto it = items.find(id);
    if (it == items.end()) throw HttpError(404, std::string("no such ") + what + ": " + id);
    return it->second;
  }

  std::string next_id(const char* prefix) {
    std::lock_guard lock(mutex_);
    std::string id = prefix + std::to_string(++counters_[prefix]);
    order_.push_back(id);
    return id;
  }

  JobStatus job_status(const std::string& job_id) const {
    auto job = jobs_.get(job_id);
    return job ? job->status : JobStatus::failed;
  }

  /// 409 unless the job that creates a prerequisite resource has finished.
  void require_done(const std::string& job_id, const std::string& what) const {
    const JobStatus s = job_status(job_id);
    if (s == JobStatus::done) return;
    if (s == JobStatus::failed) throw HttpError(409, what + " failed to build");
    throw HttpError(409, what + " is not ready (job " + job_id + " is " + to_string(s) + ")");
  }

  Response file_response(const std::string& job_id, const fs::path& path, const char* type) const {
    require_done(job_id, "resource");
    return {200, type, persist::read_file(path)};
  }

  void record(persist::RecipeAction action) {
    std::lock_guard lock(mutex_);
    persist::record_action(recipe_, std::move(action));
  }

  json status_fields(const std::string& job_id) const {
    return {{"job_id", job_id}, {"status", to_string(job_status(job_id))}};
  }

  // datasets

  json dataset_json(const Dataset& d) const {
    json files = json::array();
    for (const auto& f : d.files) files.push_back(f.filename().string());
    return {{"id", d.id}, {"series_count", d.files.size()}, {"files", files}, {"created", d.created}};
  }

  Response create_dataset(const Request& req) {
    const auto parts = parse_multipart(req.body, multipart_boundary(req.content_type));
    std::map<std::string, const FormPart*> uploads;
    for (const auto& part : parts) {
      if (part.filename.empty()) continue;
      const std::string name = fs::path(part.filename).filename().string();
      if (name.empty() || name[0] == '.' || fs::path(name).extension() != ".csv")
        throw HttpError(400, "uploaded files must be .csv: " + part.filename);
      if (!uploads.emplace(name, &part).second) throw HttpError(400, "duplicate file name: " + name);
    }
    if (uploads.empty()) throw HttpError(400, "no files uploaded");
    for (const auto& [name, part] : uploads) {
      try {
        persist::parse_time_series_csv(part->body, fs::path(name).stem().string(), name);
      } catch (const Error& e) {
        throw HttpError(400, e.what());
      }
    }

    Dataset d;
    d.id = next_id("ds");
    d.created = persist::utc_timestamp();
    persist::RecipeAction action;
    action.kind = "upload";
    action.params = {{"dataset_id", d.id}};
    for (const auto& [name, part] : uploads) {  // name order, as a CLI directory input would be
      const fs::path path = root_ / "datasets" / d.id / name;
      persist::write_file(path, part->body);
      d.files.push_back(path);
      action.inputs.push_back({persist::recipe_path(root_, path), persist::sha256_hex(part->body)});
    }
    {
      std::lock_guard lock(mutex_);
      datasets_[d.id] = d;
      persist::record_action(recipe_, std::move(action));
    }
    return detail::json_response(201, {{"id", d.id}, {"series_count", d.files.size()}});
  }

  Response list_features() const {
    json out = json::array();
    for (const auto& e : feature_catalog()) out.push_back({{"name", e.name}, {"description", e.description}, {"params", e.params}});
    return detail::json_response(200, out);
  }

  // featuresets

  json featureset_json(const Featureset& f) const {
    json j{{"id", f.id}, {"dataset_id", f.dataset_id}, {"features", f.features},
           {"feature_params", workflow::feature_params_to_json(f.params)}};
    j.update(status_fields(f.job_id));
    return j;
  }

  Response create_featureset(const Request& req) {
    const json body = detail::parse_body(req);
    for (const char* key : {"custom_features", "custom_code", "code"})
      if (body.contains(key))
        throw HttpError(405, "the service does not run user-supplied feature code; register custom features "
                             "through the library or the command line");
    detail::allow_keys(body, {"dataset_id", "features", "feature_params"});
    const Dataset d = find(datasets_, detail::required_string(body, "dataset_id"), "dataset");
    if (!body.contains("features") || !body["features"].is_array() || body["features"].empty())
      throw HttpError(400, "features (non-empty array of names) is required");
    Featureset f;
    f.dataset_id = d.id;
    for (const auto& name : body["features"]) {
      if (!name.is_string()) throw HttpError(400, "feature names must be strings");
      f.features.push_back(name.get<std::string>());
    }
    f.params = workflow::feature_params_from_json(body.value("feature_params", json::object()));
    build_feature_graph(f.features, {}, f.params);  // reject unknown names now

    f.id = next_id("fs");
    const fs::path out = featureset_file(f.id);
    std::lock_guard lock(mutex_);  // the job may finish before submit returns
    f.job_id = jobs_.submit("featurize", f.id, [this, f, d, out] {
      const auto o = workflow::featurize(d.files, f.features, f.params, 1, out);
      persist::RecipeAction action;
      action.kind = "featurize";
      action.params = {{"features", f.features}, {"feature_params", workflow::feature_params_to_json(f.params)}};
      for (const auto& file : d.files) action.inputs.push_back(persist::recipe_file(root_, file));
      action.output = persist::RecipeFile{persist::recipe_path(root_, out), o.sha256};
      record(std::move(action));
    });
    featuresets_[f.id] = f;
    return detail::json_response(202, {{"job_id", f.job_id}, {"featureset_id", f.id}});
  }

  // models

  json model_json(const Model& x) const {
    json j{{"id", x.id}, {"featureset_id", x.featureset_id}, {"learner", x.learner}, {"grid", x.grid},
           {"cv_folds", x.cv_folds}, {"seed", x.seed}};
    j.update(status_fields(x.job_id));
    {
      std::lock_guard lock(mutex_);
      if (auto it = models_.find(x.id); it != models_.end() && !it->second.summary.is_null())
        j.update(it->second.summary);
    }
    return j;
  }

  Response create_model(const Request& req) {
    const json body = detail::parse_body(req);
    detail::allow_keys(body, {"featureset_id", "learner", "grid", "cv_folds", "seed"});
    const Featureset f = find(featuresets_, detail::required_string(body, "featureset_id"), "featureset");
    Model x;
    x.featureset_id = f.id;
    x.learner = detail::required_string(body, "learner");
    x.grid = body.value("grid", json());
    if (body.contains("cv_folds") && !body["cv_folds"].is_number_unsigned())
      throw HttpError(400, "cv_folds must be a positive integer");
    if (body.contains("seed") && !body["seed"].is_number_unsigned())
      throw HttpError(400, "seed must be a non-negative integer");
    x.cv_folds = body.value("cv_folds", std::size_t{5});
    x.seed = body.value("seed", std::uint64_t{0});
    const learn::LearnerSpec spec = workflow::learner_spec(x.learner, x.grid, x.cv_folds, x.seed);
    learn::resolve_params(spec.kind, spec.params);
    for (const auto& [key, values] : spec.param_grid)
      for (double v : values) learn::resolve_params(spec.kind, {{key, v}});
    require_done(f.job_id, "featureset " + f.id);

    x.id = next_id("model");
    const fs::path in = featureset_file(f.id), out = model_file(x.id);
    std::lock_guard lock(mutex_);
    x.job_id = jobs_.submit("train", x.id, [this, x, spec, in, out] {
      const auto o = workflow::train(in, spec, out);
      const learn::TrainedModel model = persist::load_model(out);
      json cv = json::array();
      for (const auto& r : model.cv_results) cv.push_back({{"params", r.params}, {"mean_accuracy", r.mean_accuracy}});
      persist::RecipeAction action;
      action.kind = "build_model";
      action.params = {{"learner", x.learner}, {"grid", x.grid}, {"cv_folds", x.cv_folds}, {"seed", x.seed}};
      action.inputs.push_back(persist::recipe_file(root_, in));
      action.output = persist::RecipeFile{persist::recipe_path(root_, out), o.sha256};
      std::lock_guard lock(mutex_);
      models_[x.id].summary = {{"chosen_params", model.spec.params}, {"cv_results", cv}, {"classes", model.classes}};
      persist::record_action(recipe_, std::move(action));
    });
    models_[x.id] = x;
    return detail::json_response(202, {{"job_id", x.job_id}, {"model_id", x.id}});
  }

  // predictions

  json prediction_json(const PredictionSet& x, bool with_rows) const {
    json j{{"id", x.id}, {"model_id", x.model_id}, {x.source_kind + "_id", x.source_id}, {"probs", x.probs}};
    j.update(status_fields(x.job_id));
    if (with_rows && job_status(x.job_id) == JobStatus::done) {
      const std::string text = persist::read_file(prediction_file(x.id));
      std::vector<std::string> header;
      json rows = json::array();
      std::size_t start = 0;
      while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        auto cells = detail::csv_record(std::string_view(text).substr(start, end - start));
        start = end + 1;
        if (header.empty()) {
          header = std::move(cells);
          continue;
        }
        json row{{"name", cells.at(0)}, {"status", cells.at(1)}};
        row["prediction"] = cells.at(1) == "ok" ? json(cells.at(2)) : json(nullptr);
        if (header.size() > 3) {
          json probs = json::object();
          for (std::size_t k = 3; k < header.size(); ++k)
            if (cells.at(1) == "ok") probs[header[k].substr(2)] = std::stod(cells.at(k));
          row["probabilities"] = probs;
        }
        rows.push_back(std::move(row));
      }
      j["rows"] = std::move(rows);
    }
    return j;
  }

  Response create_prediction(const Request& req) {
    const json body = detail::parse_body(req);
    detail::allow_keys(body, {"model_id", "featureset_id", "dataset_id", "probs"});
    const Model model = find(models_, detail::required_string(body, "model_id"), "model");
    PredictionSet x;
    x.model_id = model.id;
    if (body.contains("probs") && !body["probs"].is_boolean()) throw HttpError(400, "probs must be a boolean");
    x.probs = body.value("probs", false);
    if (body.contains("featureset_id") == body.contains("dataset_id"))
      throw HttpError(400, "give exactly one of featureset_id or dataset_id");

    require_done(model.job_id, "model " + model.id);
    std::vector<fs::path> inputs{model_file(model.id)};
    if (body.contains("featureset_id")) {
      const Featureset f = find(featuresets_, detail::required_string(body, "featureset_id"), "featureset");
      require_done(f.job_id, "featureset " + f.id);
      x.source_kind = "featureset";
      x.source_id = f.id;
      inputs.push_back(featureset_file(f.id));
    } else {
      const Dataset d = find(datasets_, detail::required_string(body, "dataset_id"), "dataset");
      x.source_kind = "dataset";
      x.source_id = d.id;
      inputs.insert(inputs.end(), d.files.begin(), d.files.end());
    }

    x.id = next_id("pred");
    const fs::path out = prediction_file(x.id);
    std::lock_guard lock(mutex_);
    x.job_id = jobs_.submit("predict", x.id, [this, x, inputs, out] {
      const bool from_featureset = x.source_kind == "featureset";
      const auto o = from_featureset
                         ? workflow::predict_featureset(inputs[0], inputs[1], x.probs, out)
                         : workflow::predict_files(inputs[0], {inputs.begin() + 1, inputs.end()}, std::nullopt,
                                                   x.probs, 1, out);
      persist::RecipeAction action;
      action.kind = "predict";
      action.params = {{"probs", x.probs}, {"source", from_featureset ? "featureset" : "files"}};
      for (const auto& file : inputs) action.inputs.push_back(persist::recipe_file(root_, file));
      action.output = persist::RecipeFile{persist::recipe_path(root_, out), o.sha256};
      record(std::move(action));
    });
    predictions_[x.id] = x;
    return detail::json_response(202, {{"job_id", x.job_id}, {"prediction_id", x.id}});
  }

  fs::path root_;
  mutable std::mutex mutex_;
  std::map<std::string, std::size_t> counters_;
  std::vector<std::string> order_;
  std::map<std::string, Dataset> datasets_;
  std::map<std::string, Featureset> featuresets_;
  std::map<std::string, Model> models_;
  std::map<std::string, PredictionSet> predictions_;
  persist::WorkflowRecipe recipe_;
  JobQueue jobs_;  // last: workers stop before the state they touch goes away
};

}  // namespace cesium::service
