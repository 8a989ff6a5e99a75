// cesium: command-line front end for featurization, training, prediction,
// recipe replay and the workflow service.
//
// Exit codes: 0 success, 1 invalid input or arguments, 2 I/O failure.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cesium/cesium.hpp"
#include "cesium/service/server.hpp"

namespace fs = std::filesystem;
using namespace cesium;

namespace {

struct Recording {
  std::string recipe;  // empty: not recording

  void add(persist::RecipeAction action) const {
    if (recipe.empty()) return;
    persist::WorkflowRecipe r = fs::exists(recipe) ? persist::load_recipe(recipe) : persist::WorkflowRecipe{};
    persist::record_action(r, std::move(action));
    persist::save_recipe(r, recipe);
  }
};

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  for (std::string item; std::getline(ss, item, ',');) {
    while (!item.empty() && item.front() == ' ') item.erase(item.begin());
    while (!item.empty() && item.back() == ' ') item.pop_back();
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void report_warnings(const workflow::Outcome& o) {
  for (const auto& w : o.warnings) std::cerr << "warning: " << w << "\n";
}

std::vector<fs::path> to_paths(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cesium time-series feature extraction and classification"};
  app.require_subcommand(1);
  Recording rec;

  // featurize
  auto* feat = app.add_subcommand("featurize", "compute features for CSV time series");
  std::vector<std::string> feat_inputs;
  std::string feat_features, feat_params, feat_output;
  std::size_t feat_workers = 0;
  feat->add_option("--input", feat_inputs, "CSV files or directories of CSV files")->required();
  feat->add_option("--features", feat_features, "comma-separated feature names")->required();
  feat->add_option("--params", feat_params, "JSON file of feature parameters");
  feat->add_option("--workers", feat_workers, "worker threads (0 = one per core)");
  feat->add_option("--output", feat_output, "feature set archive to write")->required();
  feat->add_option("--recipe", rec.recipe, "append this action to a recipe file");

  // train
  auto* train = app.add_subcommand("train", "build a classifier from a feature set");
  std::string train_fs, train_learner, train_grid, train_output;
  std::size_t train_cv = 5;
  std::uint64_t train_seed = 0;
  train->add_option("--featureset", train_fs, "feature set archive with targets")->required();
  train->add_option("--learner", train_learner, "knn or random_forest")->required();
  train->add_option("--grid", train_grid, "JSON file: numbers fix a hyperparameter, arrays are searched");
  train->add_option("--cv", train_cv, "cross-validation folds for the grid search");
  auto* seed_opt = train->add_option("--seed", train_seed, "seed for folds and forests");
  train->add_option("--output", train_output, "model archive to write")->required();
  train->add_option("--recipe", rec.recipe, "append this action to a recipe file");

  // predict
  auto* pred = app.add_subcommand("predict", "predict labels with a trained model");
  std::string pred_model, pred_fs, pred_params, pred_output;
  std::vector<std::string> pred_inputs;
  bool pred_probs = false;
  std::size_t pred_workers = 0;
  pred->add_option("--model", pred_model, "model archive")->required();
  auto* pred_fs_opt = pred->add_option("--featureset", pred_fs, "feature set archive");
  auto* pred_in_opt = pred->add_option("--input", pred_inputs, "CSV files or directories to featurize first");
  pred_fs_opt->excludes(pred_in_opt);
  pred->add_option("--params", pred_params, "feature parameters used with --input");
  pred->add_option("--workers", pred_workers, "worker threads used with --input");
  pred->add_flag("--probs", pred_probs, "write class probabilities");
  pred->add_option("--output", pred_output, "prediction CSV to write")->required();
  pred->add_option("--recipe", rec.recipe, "append this action to a recipe file");

  // split
  auto* split = app.add_subcommand("split", "print a seeded train/test index split");
  std::size_t split_n = 0;
  double split_fraction = 0.25;
  std::uint64_t split_seed = 0;
  split->add_option("--n", split_n, "number of rows")->required();
  split->add_option("--test-fraction", split_fraction, "share of rows held out")->required();
  split->add_option("--seed", split_seed, "permutation seed")->required();

  // features list
  auto* features = app.add_subcommand("features", "feature catalog");
  features->require_subcommand(1);
  auto* features_list = features->add_subcommand("list", "print every builtin feature");

  // serve
  auto* serve = app.add_subcommand("serve", "run the workflow service");
  unsigned short serve_port = 8000;
  std::size_t serve_workers = 2;
  std::string serve_root = "cesium-data";
  serve->add_option("--port", serve_port, "listen port (0 picks a free one)");
  serve->add_option("--workers", serve_workers, "job worker threads");
  serve->add_option("--data-dir", serve_root, "where datasets and results are stored");

  // recipe
  auto* recipe = app.add_subcommand("recipe", "workflow recipes");
  recipe->require_subcommand(1);
  auto* replay = recipe->add_subcommand("replay", "re-run a recipe and compare output hashes");
  std::string replay_file, replay_workspace;
  replay->add_option("recipe", replay_file, "recipe JSON file")->required();
  replay->add_option("--workspace", replay_workspace, "directory holding inputs; outputs are written here")->required();
  auto* export_cmd = recipe->add_subcommand("export", "print a shell script that re-runs a recipe");
  std::string export_file;
  export_cmd->add_option("recipe", export_file, "recipe JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (feat->parsed()) {
      const auto inputs = workflow::expand_inputs(to_paths(feat_inputs));
      const auto names = split_list(feat_features);
      const FeatureParams params =
          feat_params.empty() ? FeatureParams{} : workflow::feature_params_from_json(workflow::read_json_file(feat_params));
      const auto o = workflow::featurize(inputs, names, params, feat_workers, feat_output);
      report_warnings(o);
      persist::RecipeAction a;
      a.kind = "featurize";
      a.params = {{"features", names}, {"feature_params", workflow::feature_params_to_json(params)}};
      for (const auto& p : inputs) a.inputs.push_back(persist::recipe_file(fs::current_path(), p));
      a.output = persist::RecipeFile{persist::recipe_path(fs::current_path(), feat_output), o.sha256};
      rec.add(std::move(a));
    } else if (train->parsed()) {
      if (!rec.recipe.empty() && seed_opt->count() == 0)
        throw ValidationError("--seed is required when recording a recipe");
      const workflow::json grid = train_grid.empty() ? workflow::json() : workflow::read_json_file(train_grid);
      const auto spec = workflow::learner_spec(train_learner, grid, train_cv, train_seed);
      const auto o = workflow::train(train_fs, spec, train_output);
      persist::RecipeAction a;
      a.kind = "build_model";
      a.params = {{"learner", train_learner}, {"grid", grid}, {"cv_folds", train_cv}, {"seed", train_seed}};
      a.inputs.push_back(persist::recipe_file(fs::current_path(), train_fs));
      a.output = persist::RecipeFile{persist::recipe_path(fs::current_path(), train_output), o.sha256};
      rec.add(std::move(a));
    } else if (pred->parsed()) {
      persist::RecipeAction a;
      a.kind = "predict";
      a.inputs.push_back(persist::recipe_file(fs::current_path(), pred_model));
      workflow::Outcome o;
      if (!pred_fs.empty()) {
        o = workflow::predict_featureset(pred_model, pred_fs, pred_probs, pred_output);
        a.params = {{"probs", pred_probs}, {"source", "featureset"}};
        a.inputs.push_back(persist::recipe_file(fs::current_path(), pred_fs));
      } else if (!pred_inputs.empty()) {
        const auto inputs = workflow::expand_inputs(to_paths(pred_inputs));
        std::optional<FeatureParams> params;
        if (!pred_params.empty()) params = workflow::feature_params_from_json(workflow::read_json_file(pred_params));
        o = workflow::predict_files(pred_model, inputs, params, pred_probs, pred_workers, pred_output);
        a.params = {{"probs", pred_probs}, {"source", "files"}};
        if (params) a.params["feature_params"] = workflow::feature_params_to_json(*params);
        for (const auto& p : inputs) a.inputs.push_back(persist::recipe_file(fs::current_path(), p));
      } else {
        throw ValidationError("predict needs --featureset or --input");
      }
      report_warnings(o);
      a.output = persist::RecipeFile{persist::recipe_path(fs::current_path(), pred_output), o.sha256};
      rec.add(std::move(a));
    } else if (split->parsed()) {
      const auto s = learn::train_test_split(split_n, split_fraction, split_seed);
      auto print = [](const char* label, const std::vector<std::size_t>& idx) {
        std::cout << label << ":";
        for (auto i : idx) std::cout << " " << i;
        std::cout << "\n";
      };
      print("train", s.train);
      print("test", s.test);
    } else if (features_list->parsed()) {
      for (const auto& e : feature_catalog()) std::cout << e.name << "\t" << e.description << "\n";
    } else if (serve->parsed()) {
      service::ServerOptions opt;
      opt.address = "0.0.0.0";
      opt.port = serve_port;
      opt.workers = serve_workers;
      opt.root = serve_root;
      service::Server server(opt);
      std::cerr << "listening on port " << server.port() << ", data in " << server.api().root().string() << "\n";
      server.wait_for_signal();
      server.stop();
    } else if (replay->parsed()) {
      const auto report = persist::replay_recipe(persist::load_recipe(replay_file), replay_workspace);
      std::cout << persist::report_to_json(report).dump(2) << "\n";
      if (!persist::all_match(report)) {
        for (const auto& e : report)
          if (!e.match) std::cerr << "action " << e.action << " (" << e.kind << "): output " << e.output << " differs\n";
        return 1;
      }
    } else if (export_cmd->parsed()) {
      std::cout << persist::export_recipe_script(persist::load_recipe(export_file));
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
