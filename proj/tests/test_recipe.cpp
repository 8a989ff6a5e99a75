#include <gtest/gtest.h>

#include "cesium/persist/recipe.hpp"
#include "support.hpp"

using namespace cesium;
using namespace cesium::persist;
namespace ts = testing_support;
namespace fs = std::filesystem;

namespace {

void copy_data(const fs::path& to) {
  fs::create_directories(to);
  for (const auto& e : fs::directory_iterator(ts::synthetic_data_dir())) fs::copy_file(e.path(), to / e.path().filename());
}

/// Records featurize -> train -> predict (both sources) with the CLI in `dir`.
void record_workflow(const fs::path& dir) {
  copy_data(dir / "data");
  ts::write_text(dir / "grid.json", R"({"n_estimators": [4, 16], "max_depth": -1})");
  ts::write_text(dir / "params.json", R"({"ls_n_freq": 2, "ls_n_harm": 2})");
  const std::string cli = ts::cli();
  for (const std::string& cmd :
       {cli + " featurize --input data --features amplitude,std,skew,freq1_freq,freq2_amplitude1 --params params.json"
              " --output out/train.cfs --recipe recipe.json",
        cli + " train --featureset out/train.cfs --learner random_forest --grid grid.json --cv 3 --seed 42"
              " --output out/model.cmodel --recipe recipe.json",
        cli + " predict --model out/model.cmodel --featureset out/train.cfs --probs --output out/pred.csv"
              " --recipe recipe.json",
        cli + " predict --model out/model.cmodel --input data/periodic_00.csv data/stochastic_03.csv"
              " --params params.json --output out/pred_files.csv --recipe recipe.json"}) {
    const auto r = ts::run(cmd, dir);
    ASSERT_EQ(r.exit_code, 0) << cmd << "\n" << r.err;
  }
}

}  // namespace

TEST(Recipe, RecordsEveryAction) {
  ts::TempDir dir;
  record_workflow(dir.path());
  const auto recipe = load_recipe(dir / "recipe.json");
  ASSERT_EQ(recipe.actions.size(), 4u);
  EXPECT_EQ(recipe.actions[0].kind, "featurize");
  EXPECT_EQ(recipe.actions[0].inputs.size(), 20u);
  EXPECT_EQ(recipe.actions[0].inputs[0].path, "data/periodic_00.csv");
  EXPECT_EQ(recipe.actions[1].kind, "build_model");
  EXPECT_EQ(recipe.actions[1].params.at("seed"), 42);
  EXPECT_EQ(recipe.actions[3].params.at("source"), "files");
  for (const auto& a : recipe.actions) {
    ASSERT_TRUE(a.output);
    EXPECT_EQ(a.output->sha256, sha256_file(dir / a.output->path));
    EXPECT_FALSE(a.timestamp.empty());
  }
  // JSON form round-trips.
  EXPECT_EQ(recipe_to_json(recipe_from_json(recipe_to_json(recipe))), recipe_to_json(recipe));
}

TEST(Recipe, ReplayInPlaceMatches) {
  ts::TempDir dir;
  record_workflow(dir.path());
  const auto report = replay_recipe(load_recipe(dir / "recipe.json"), dir.path());
  ASSERT_EQ(report.size(), 4u);
  EXPECT_TRUE(all_match(report));
  for (const auto& e : report) EXPECT_EQ(e.actual, e.expected) << e.action;
}

TEST(Recipe, ReplayInFreshWorkspaceFindsInputsByContent) {
  ts::TempDir orig, fresh;
  record_workflow(orig.path());
  // Inputs under a different directory name; outputs absent.
  copy_data(fresh / "elsewhere");
  fs::copy_file(orig / "recipe.json", fresh / "recipe.json");
  const auto r = ts::run(ts::cli() + " recipe replay recipe.json --workspace .", fresh.path());
  EXPECT_EQ(r.exit_code, 0) << r.err;
  const auto report = json::parse(r.out);
  ASSERT_EQ(report.size(), 4u);
  for (const auto& e : report) EXPECT_TRUE(e.at("match").get<bool>()) << e.dump();
  const auto recipe = load_recipe(orig / "recipe.json");
  for (const auto& a : recipe.actions) EXPECT_EQ(sha256_file(fresh / a.output->path), a.output->sha256);
}

TEST(Recipe, ExportedScriptReproducesHashes) {
  ts::TempDir orig, fresh;
  record_workflow(orig.path());
  copy_data(fresh / "data");
  const auto exported = ts::run(ts::cli() + " recipe export recipe.json", orig.path());
  ASSERT_EQ(exported.exit_code, 0) << exported.err;
  ts::write_text(fresh / "replay.sh", exported.out);
  const auto r = ts::run("CESIUM=" + ts::cli() + " sh replay.sh", fresh.path());
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto recipe = load_recipe(orig / "recipe.json");
  for (const auto& a : recipe.actions) {
    ASSERT_TRUE(fs::exists(fresh / a.output->path)) << a.output->path;
    EXPECT_EQ(sha256_file(fresh / a.output->path), a.output->sha256) << a.output->path;
  }
}

TEST(Recipe, MissingInputNamesAction) {
  ts::TempDir orig, fresh;
  record_workflow(orig.path());
  try {
    replay_recipe(load_recipe(orig / "recipe.json"), fresh.path());
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("action 1 (featurize)"), std::string::npos) << e.what();
  }
  fs::copy_file(orig / "recipe.json", fresh / "recipe.json");
  EXPECT_EQ(ts::run(ts::cli() + " recipe replay recipe.json --workspace .", fresh.path()).exit_code, 2);
}

TEST(Recipe, TamperedHashReportedAsMismatch) {
  ts::TempDir dir;
  record_workflow(dir.path());
  auto recipe = load_recipe(dir / "recipe.json");
  recipe.actions[2].output->sha256 = std::string(64, '0');
  save_recipe(recipe, dir / "tampered.json");
  const auto report = replay_recipe(recipe, dir.path());
  EXPECT_FALSE(all_match(report));
  EXPECT_TRUE(report[0].match);
  EXPECT_FALSE(report[2].match);
  const auto r = ts::run(ts::cli() + " recipe replay tampered.json --workspace .", dir.path());
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("action 3"), std::string::npos) << r.err;
}

TEST(Recipe, EmptyRecipeReplaysToEmptyReport) {
  ts::TempDir dir;
  const auto report = replay_recipe(WorkflowRecipe{}, dir.path());
  EXPECT_TRUE(report.empty());
  EXPECT_TRUE(all_match(report));
}

TEST(Recipe, RecordingValidatesActions) {
  WorkflowRecipe r;
  EXPECT_THROW(record_action(r, RecipeAction{"delete", json::object(), {}, RecipeFile{"x", "y"}, ""}), ValidationError);
  EXPECT_THROW(record_action(r, RecipeAction{"featurize", json::object(), {}, std::nullopt, ""}), ValidationError);
  EXPECT_THROW(record_action(r, RecipeAction{"build_model", json{{"learner", "knn"}}, {}, RecipeFile{"m", "h"}, ""}),
               ValidationError);
  ts::TempDir dir;
  const auto res = ts::run(ts::cli() + " train --featureset a.cfs --learner knn --output m --recipe r.json", dir.path());
  EXPECT_EQ(res.exit_code, 1);
  EXPECT_NE(res.err.find("--seed"), std::string::npos) << res.err;
}
