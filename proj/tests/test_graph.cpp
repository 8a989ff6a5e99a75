#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <random>
#include <set>

#include "cesium/features.hpp"
#include "cesium/graph.hpp"

using namespace cesium;

namespace {

std::set<std::string> node_set(const FeatureGraph& g) {
  std::set<std::string> out;
  for (const auto& [id, node] : g.nodes()) out.insert(id);
  return out;
}

ChannelData channel(std::vector<double> v) { return ChannelData{{}, std::move(v), {}}; }

ChannelData noisy_sine(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ChannelData ch;
  double t = 0;
  for (std::size_t i = 0; i < n; ++i) {
    t += 0.1 + u(rng);
    ch.times.push_back(t);
    ch.values.push_back(std::sin(0.7 * t) + 0.1 * u(rng));
  }
  return ch;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(BuildGraph, AmplitudePullsInMaxAndMin) {
  const auto g = build_feature_graph({"amplitude"});
  EXPECT_EQ(node_set(g), (std::set<std::string>{"times", "values", "errors", "maximum", "minimum", "amplitude"}));
  EXPECT_EQ(g.outputs(), std::vector<std::string>{"amplitude"});
}

TEST(BuildGraph, LombScargleOutputsShareModelNode) {
  const auto g = build_feature_graph({"freq1_amplitude1", "freq1_freq"});
  EXPECT_EQ(g.nodes().at("freq1_amplitude1").deps, std::vector<std::string>{lomb_scargle_node});
  EXPECT_EQ(g.nodes().at("freq1_freq").deps, std::vector<std::string>{lomb_scargle_node});
  std::size_t models = 0;
  for (const auto& [id, node] : g.nodes()) models += id == lomb_scargle_node;
  EXPECT_EQ(models, 1u);
}

TEST(BuildGraph, UnknownFeature) {
  EXPECT_EQ(message_of([] { build_feature_graph({"nope"}); }), "unknown feature: nope");
  EXPECT_THROW(build_feature_graph({"nope"}), ValidationError);
}

TEST(BuildGraph, CustomMayNotShadowBuiltin) {
  NodeDefs custom{{"mean", custom_feature([](auto, auto, auto) { return 0.0; })}};
  EXPECT_THROW(build_feature_graph({"mean"}, custom), ValidationError);
}

TEST(BuildGraph, CycleReportsPath) {
  auto id = [](const NodeArgs& a) { return Value{a.scalar(0)}; };
  NodeDefs custom{{"a", NodeDef{{"b"}, id, {}}}, {"b", NodeDef{{"c"}, id, {}}}, {"c", NodeDef{{"a"}, id, {}}}};
  const std::string msg = message_of([&] { build_feature_graph({"a"}, custom); });
  EXPECT_NE(msg.find("a -> b -> c -> a"), std::string::npos) << msg;
}

TEST(BuildGraph, DuplicateRequestRejected) {
  EXPECT_EQ(message_of([] { build_feature_graph({"mean", "std", "mean"}); }), "duplicate feature: mean");
}

TEST(BuildGraph, SharedDependenciesAppearOnce) {
  const auto g = build_feature_graph({"std", "skew", "percent_beyond_1_std"});
  EXPECT_EQ(node_set(g), (std::set<std::string>{"times", "values", "errors", "mean", "std", "skew",
                                                 "percent_beyond_1_std"}));
}

TEST(BuildGraph, OrderIsDeterministicAndTopological) {
  const auto g = build_feature_graph({"percent_beyond_1_std", "amplitude", "skew"});
  EXPECT_EQ(g.order(), (std::vector<std::string>{"maximum", "mean", "minimum", "amplitude", "skew", "std",
                                                  "percent_beyond_1_std"}));
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < g.order().size(); ++i) pos[g.order()[i]] = i;
  for (const auto& id : g.order())
    for (const auto& dep : g.nodes().at(id).deps)
      if (!is_input_node(dep)) {
        EXPECT_LT(pos.at(dep), pos.at(id));
      }
}

TEST(Execute, MaxMinAmplitude) {
  const auto g = build_feature_graph({"maximum", "minimum", "amplitude"});
  ExecutionStats stats;
  const auto out = execute(g, channel({1, 5, 3}), &stats);
  EXPECT_EQ(std::get<double>(out.at("maximum")), 5.0);
  EXPECT_EQ(std::get<double>(out.at("minimum")), 1.0);
  EXPECT_EQ(std::get<double>(out.at("amplitude")), 2.0);
  EXPECT_EQ(stats.total(), 3);
  EXPECT_EQ(stats.count("maximum"), 1);
  EXPECT_EQ(stats.count("minimum"), 1);
  EXPECT_EQ(stats.count("amplitude"), 1);
}

TEST(Execute, LombScargleModelEvaluatedOnce) {
  FeatureParams p;
  p.ls_n_freq = 1;
  p.ls_n_harm = 2;
  const std::vector<std::string> outputs{"freq1_freq",       "freq1_signif",    "freq1_amplitude1",
                                         "freq1_amplitude2", "freq1_rel_phase1", "freq1_rel_phase2"};
  const auto g = build_feature_graph(outputs, {}, p);
  ExecutionStats stats;
  const auto out = execute(g, noisy_sine(60, 1), &stats);
  EXPECT_EQ(out.size(), 6u);
  EXPECT_EQ(stats.count(lomb_scargle_node), 1);
  EXPECT_EQ(stats.total(), 7);
}

TEST(Execute, EmptyOutputsEvaluateNothing) {
  const auto g = build_feature_graph({});
  ExecutionStats stats;
  EXPECT_TRUE(execute(g, channel({1, 2}), &stats).empty());
  EXPECT_EQ(stats.total(), 0);
}

TEST(Execute, EveryReachableNodeRunsExactlyOnce) {
  std::vector<std::string> all = summary_feature_names();
  for (const auto& e : feature_catalog()) all.push_back(e.name);
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  const auto g = build_feature_graph(all);
  ExecutionStats stats;
  (void)execute(g, noisy_sine(80, 2), &stats);
  for (const auto& id : g.order()) EXPECT_EQ(stats.count(id), 1) << id;
  EXPECT_EQ(static_cast<std::size_t>(stats.total()), g.order().size());
}

TEST(Execute, RepeatedCallsBitIdentical) {
  std::vector<std::string> all;
  for (const auto& e : feature_catalog()) all.push_back(e.name);
  const auto g = build_feature_graph(all);
  const auto ch = noisy_sine(90, 3);
  const auto a = execute(g, ch), b = execute(g, ch);
  for (const auto& [k, v] : a) {
    const double x = std::get<double>(v), y = std::get<double>(b.at(k));
    EXPECT_EQ(std::memcmp(&x, &y, sizeof x), 0) << k;
  }
}

TEST(Execute, UnrelatedOutputDoesNotChangeValues) {
  const auto ch = noisy_sine(70, 4);
  const auto small = execute(build_feature_graph({"std", "freq1_freq"}), ch);
  const auto big = execute(build_feature_graph({"std", "freq1_freq", "median", "abs_diffs"}), ch);
  EXPECT_EQ(std::get<double>(small.at("std")), std::get<double>(big.at("std")));
  EXPECT_EQ(std::get<double>(small.at("freq1_freq")), std::get<double>(big.at("freq1_freq")));
}

TEST(Execute, CustomFeatureSeesTripleAndSharesNodes) {
  std::atomic<int> calls{0};
  NodeDefs custom;
  custom["span"] = custom_feature([&](std::span<const double> t, std::span<const double> v, std::span<const double> e) {
    ++calls;
    EXPECT_EQ(t.size(), v.size());
    EXPECT_TRUE(e.empty());
    return t.back() - t.front();
  });
  custom["range_ratio"] = NodeDef{{"amplitude", "span"},
                                  [](const NodeArgs& a) { return Value{a.scalar(0) / a.scalar(1)}; },
                                  {}};
  const auto g = build_feature_graph({"range_ratio", "span", "amplitude"}, custom);
  ExecutionStats stats;
  const auto out = execute(g, channel({0, 4, 2, 1}), &stats);
  EXPECT_EQ(calls.load(), 1);
  EXPECT_EQ(std::get<double>(out.at("span")), 3.0);
  EXPECT_EQ(std::get<double>(out.at("range_ratio")), 2.0 / 3.0);
}

TEST(Execute, FailureNamesNode) {
  NodeDefs custom{{"boom", custom_feature([](auto, auto, auto) -> double { throw std::runtime_error("bad"); })}};
  const auto g = build_feature_graph({"boom", "mean"}, custom);
  try {
    (void)execute(g, channel({1, 2}));
    FAIL() << "expected NodeError";
  } catch (const NodeError& e) {
    EXPECT_EQ(e.node(), "boom");
    EXPECT_EQ(e.cause(), "bad");
  }
}

TEST(Execute, PartialIsolatesFailures) {
  // max_slope needs two samples: only it and its dependents fail.
  NodeDefs custom{{"slope_x2", NodeDef{{"max_slope"}, [](const NodeArgs& a) { return Value{2 * a.scalar(0)}; }, {}}}};
  const auto g = build_feature_graph({"max_slope", "slope_x2", "mean"}, custom);
  const auto r = execute_partial(g, channel({3}));
  EXPECT_EQ(std::get<double>(r.values.at("mean")), 3.0);
  EXPECT_EQ(r.failures.count("max_slope"), 1u);
  EXPECT_EQ(r.failures.count("slope_x2"), 1u);
  EXPECT_NE(r.failures.at("slope_x2").find("max_slope"), std::string::npos);
}
