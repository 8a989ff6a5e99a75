#pragma once

// Workflow recipes: an ordered log of actions, each naming its inputs and
// output by path and SHA-256. Paths are stored relative to the directory the
// workflow ran in. Replay re-runs every action inside a workspace and checks
// that each output hashes to what was recorded.
//
// Action params by kind:
//   upload      {}                        inputs: the uploaded files
//   featurize   {features, feature_params}  inputs: CSV files
//   build_model {learner, grid, cv_folds, seed}  inputs: [featureset]
//   predict     {probs, source: "featureset"}  inputs: [model, featureset]
//               {probs, source: "files", feature_params?}  inputs: [model, CSV files...]

#include <chrono>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cesium/workflow.hpp"

namespace cesium::persist {

struct RecipeFile {
  std::string path;
  std::string sha256;
  friend bool operator==(const RecipeFile&, const RecipeFile&) = default;
};

struct RecipeAction {
  std::string kind;
  json params = json::object();
  std::vector<RecipeFile> inputs;
  std::optional<RecipeFile> output;
  std::string timestamp;
};

struct WorkflowRecipe {
  std::vector<RecipeAction> actions;
};

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// `path` as it should appear in a recipe run from `base`.
inline std::string recipe_path(const std::filesystem::path& base, const std::filesystem::path& path) {
  const auto abs = std::filesystem::weakly_canonical(std::filesystem::absolute(path));
  const auto root = std::filesystem::weakly_canonical(std::filesystem::absolute(base));
  const auto rel = abs.lexically_relative(root);
  if (rel.empty() || *rel.begin() == "..") return abs.generic_string();
  return rel.generic_string();
}

inline RecipeFile recipe_file(const std::filesystem::path& base, const std::filesystem::path& path) {
  return {recipe_path(base, path), sha256_file(path)};
}

inline void record_action(WorkflowRecipe& recipe, RecipeAction action) {
  static const std::vector<std::string> kinds{"upload", "featurize", "build_model", "predict"};
  if (std::find(kinds.begin(), kinds.end(), action.kind) == kinds.end())
    throw ValidationError("unknown recipe action: " + action.kind);
  if (action.kind != "upload" && !action.output) throw ValidationError(action.kind + " action needs an output");
  if (action.kind == "build_model" && !action.params.contains("seed"))
    throw ValidationError("build_model actions must record a seed");
  if (action.timestamp.empty()) action.timestamp = utc_timestamp();
  recipe.actions.push_back(std::move(action));
}

inline json recipe_to_json(const WorkflowRecipe& r) {
  auto file = [](const RecipeFile& f) { return json{{"path", f.path}, {"sha256", f.sha256}}; };
  json actions = json::array();
  for (const auto& a : r.actions) {
    json inputs = json::array();
    for (const auto& f : a.inputs) inputs.push_back(file(f));
    actions.push_back({{"kind", a.kind},
                       {"params", a.params},
                       {"inputs", std::move(inputs)},
                       {"output", a.output ? file(*a.output) : json(nullptr)},
                       {"timestamp", a.timestamp}});
  }
  return {{"schema_version", schema_version}, {"actions", std::move(actions)}};
}

inline WorkflowRecipe recipe_from_json(const json& j) {
  WorkflowRecipe r;
  try {
    if (j.at("schema_version").get<std::string>() != schema_version)
      throw FormatError("unknown schema_version " + j.at("schema_version").dump());
    auto file = [](const json& f) { return RecipeFile{f.at("path").get<std::string>(), f.at("sha256").get<std::string>()}; };
    for (const auto& a : j.at("actions")) {
      RecipeAction action;
      action.kind = a.at("kind").get<std::string>();
      action.params = a.at("params");
      for (const auto& f : a.at("inputs")) action.inputs.push_back(file(f));
      if (!a.at("output").is_null()) action.output = file(a.at("output"));
      action.timestamp = a.value("timestamp", "");
      r.actions.push_back(std::move(action));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed recipe: ") + e.what());
  }
  return r;
}

inline WorkflowRecipe load_recipe(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return recipe_from_json(json::parse(text));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void save_recipe(const WorkflowRecipe& r, const std::filesystem::path& path) {
  write_file(path, recipe_to_json(r).dump(2) + "\n");
}

struct ReplayEntry {
  std::size_t action = 0;  ///< 1-based
  std::string kind;
  std::string output;
  std::string expected;
  std::string actual;
  bool match = true;
  friend bool operator==(const ReplayEntry&, const ReplayEntry&) = default;
};

using ReplayReport = std::vector<ReplayEntry>;

inline bool all_match(const ReplayReport& report) {
  return std::all_of(report.begin(), report.end(), [](const ReplayEntry& e) { return e.match; });
}

inline json report_to_json(const ReplayReport& report) {
  json out = json::array();
  for (const auto& e : report)
    out.push_back({{"action", e.action},
                   {"kind", e.kind},
                   {"output", e.output},
                   {"expected", e.expected},
                   {"actual", e.actual},
                   {"match", e.match}});
  return out;
}

namespace detail {

/// Where a recorded path lives inside the workspace. Absolute paths from the
/// original run are re-homed by file name.
inline std::filesystem::path workspace_path(const std::filesystem::path& workspace, const std::string& recorded) {
  const std::filesystem::path p(recorded);
  return p.is_absolute() ? workspace / p.filename() : workspace / p;
}

class InputResolver {
 public:
  explicit InputResolver(const std::filesystem::path& workspace) : workspace_(std::filesystem::absolute(workspace)) {}

  /// Finds a file with the recorded content: at its recorded location, else
  /// anywhere in the workspace (copied under .replay/ with its recorded name
  /// so series names still match).
  std::filesystem::path resolve(const RecipeFile& f, std::size_t action, const std::string& kind) {
    std::error_code ec;
    for (const auto& direct : {std::filesystem::path(f.path), workspace_path(workspace_, f.path)}) {
      if (direct.is_absolute() && std::filesystem::is_regular_file(direct, ec) && sha256_file(direct) == f.sha256)
        return direct;
    }
    index();
    const auto hit = by_hash_.find(f.sha256);
    if (hit == by_hash_.end())
      throw IoError("action " + std::to_string(action) + " (" + kind + "): input " + f.path +
                    " not found in workspace (sha256 " + f.sha256 + ")");
    const auto copy = workspace_ / ".replay" / std::to_string(action) /
                      std::filesystem::path(f.path).filename();
    if (copy != hit->second) {
      std::filesystem::create_directories(copy.parent_path());
      std::filesystem::copy_file(hit->second, copy, std::filesystem::copy_options::overwrite_existing);
    }
    return copy;
  }

  void forget() { indexed_ = false; }

 private:
  void index() {
    if (indexed_) return;
    by_hash_.clear();
    std::error_code ec;
    for (auto it = std::filesystem::recursive_directory_iterator(workspace_, ec);
         !ec && it != std::filesystem::recursive_directory_iterator(); it.increment(ec)) {
      if (it->is_regular_file()) by_hash_.emplace(sha256_file(it->path()), it->path());
    }
    indexed_ = true;
  }

  std::filesystem::path workspace_;
  std::map<std::string, std::filesystem::path> by_hash_;
  bool indexed_ = false;
};

inline std::vector<std::string> string_list(const json& j) { return j.get<std::vector<std::string>>(); }

}  // namespace detail

/// Re-runs every action in `workspace`. Outputs go to their recorded paths;
/// the report lists each action with the expected and obtained output hash.
inline ReplayReport replay_recipe(const WorkflowRecipe& recipe, const std::filesystem::path& workspace) {
  namespace wf = workflow;
  ReplayReport report;
  detail::InputResolver resolver(workspace);
  for (std::size_t i = 0; i < recipe.actions.size(); ++i) {
    const RecipeAction& a = recipe.actions[i];
    const std::size_t n = i + 1;
    std::vector<std::filesystem::path> in;
    for (const auto& f : a.inputs) in.push_back(resolver.resolve(f, n, a.kind));

    ReplayEntry entry{n, a.kind, "", "", "", true};
    if (a.kind == "upload") {
      report.push_back(entry);
      continue;
    }
    if (!a.output) throw FormatError("action " + std::to_string(n) + " (" + a.kind + ") has no output");
    const auto out = detail::workspace_path(workspace, a.output->path);
    try {
      const json& p = a.params;
      wf::Outcome o;
      if (a.kind == "featurize") {
        o = wf::featurize(in, detail::string_list(p.at("features")),
                          wf::feature_params_from_json(p.value("feature_params", json::object())), 0, out);
      } else if (a.kind == "build_model") {
        if (in.size() != 1) throw FormatError("build_model takes one input");
        o = wf::train(in[0],
                      wf::learner_spec(p.at("learner").get<std::string>(), p.value("grid", json()),
                                       p.at("cv_folds").get<std::size_t>(), p.at("seed").get<std::uint64_t>()),
                      out);
      } else if (a.kind == "predict") {
        if (in.size() < 2) throw FormatError("predict takes a model and data");
        const bool probs = p.value("probs", false);
        if (p.value("source", "featureset") == "featureset") {
          o = wf::predict_featureset(in[0], in[1], probs, out);
        } else {
          std::optional<FeatureParams> fp;
          if (p.contains("feature_params")) fp = wf::feature_params_from_json(p.at("feature_params"));
          o = wf::predict_files(in[0], {in.begin() + 1, in.end()}, fp, probs, 0, out);
        }
      } else {
        throw FormatError("unknown recipe action: " + a.kind);
      }
      entry.actual = o.sha256;
    } catch (const json::exception& e) {
      throw FormatError("action " + std::to_string(n) + " (" + a.kind + "): malformed params: " + e.what());
    }
    entry.output = a.output->path;
    entry.expected = a.output->sha256;
    entry.match = entry.actual == entry.expected;
    resolver.forget();
    report.push_back(std::move(entry));
  }
  return report;
}

namespace detail {

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

inline std::string script_path(const std::string& recorded) {
  const std::filesystem::path p(recorded);
  return shell_quote(p.is_absolute() ? p.filename().string() : recorded);
}

inline std::string heredoc(const std::string& file, const json& j) {
  return "cat > " + file + " <<'JSON'\n" + j.dump(2) + "\nJSON\n";
}

}  // namespace detail

/// POSIX shell script running each action through the cesium CLI. Inputs
/// that no earlier action produced must already sit at their recorded paths.
/// Set CESIUM to the binary if it is not on PATH.
inline std::string export_recipe_script(const WorkflowRecipe& recipe) {
  using detail::script_path;
  std::string s = "#!/bin/sh\nset -e\nCESIUM=\"${CESIUM:-cesium}\"\nmkdir -p .recipe\n";
  for (std::size_t i = 0; i < recipe.actions.size(); ++i) {
    const RecipeAction& a = recipe.actions[i];
    const std::string n = std::to_string(i + 1);
    const json& p = a.params;
    s += "\n# action " + n + ": " + a.kind + "\n";
    if (a.kind == "upload") {
      for (const auto& f : a.inputs) s += "#   " + f.path + " sha256 " + f.sha256 + "\n";
      continue;
    }
    std::string cmd = "\"$CESIUM\"";
    if (a.kind == "featurize") {
      const std::string params_file = ".recipe/params_" + n + ".json";
      s += detail::heredoc(params_file, p.value("feature_params", json::object()));
      cmd += " featurize --input";
      for (const auto& f : a.inputs) cmd += " " + script_path(f.path);
      std::string features;
      for (const auto& f : detail::string_list(p.at("features"))) features += (features.empty() ? "" : ",") + f;
      cmd += " --features " + detail::shell_quote(features) + " --params " + params_file;
    } else if (a.kind == "build_model") {
      cmd += " train --featureset " + script_path(a.inputs.at(0).path) + " --learner " +
             detail::shell_quote(p.at("learner").get<std::string>());
      if (p.contains("grid") && !p.at("grid").is_null()) {
        const std::string grid_file = ".recipe/grid_" + n + ".json";
        s += detail::heredoc(grid_file, p.at("grid"));
        cmd += " --grid " + grid_file;
      }
      cmd += " --cv " + std::to_string(p.at("cv_folds").get<std::size_t>()) + " --seed " +
             std::to_string(p.at("seed").get<std::uint64_t>());
    } else if (a.kind == "predict") {
      cmd += " predict --model " + script_path(a.inputs.at(0).path);
      if (p.value("source", "featureset") == "featureset") {
        cmd += " --featureset " + script_path(a.inputs.at(1).path);
      } else {
        if (p.contains("feature_params")) {
          const std::string params_file = ".recipe/params_" + n + ".json";
          s += detail::heredoc(params_file, p.at("feature_params"));
          cmd += " --params " + params_file;
        }
        cmd += " --input";
        for (std::size_t k = 1; k < a.inputs.size(); ++k) cmd += " " + script_path(a.inputs[k].path);
      }
      if (p.value("probs", false)) cmd += " --probs";
    }
    cmd += " --output " + script_path(a.output->path);
    s += cmd + "\n";
    s += "# expect sha256 " + a.output->sha256 + "\n";
  }
  return s;
}

}  // namespace cesium::persist
