#pragma once

// Directed acyclic computation graph over feature functions.
//
// A graph holds three input nodes ("times", "values", "errors") plus the
// function nodes needed to produce the requested outputs. `execute` walks the
// nodes once in a fixed topological order (dependencies first, ties broken by
// node id), memoizes every intermediate for the duration of the call, and
// drops an intermediate as soon as its last consumer has run.

#include <any>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cesium/core.hpp"
#include "cesium/error.hpp"

namespace cesium {

/// Result of a graph node: a scalar, an array, or an opaque object such as a
/// fitted model (held through a shared_ptr inside the any).
using Value = std::variant<double, std::vector<double>, std::any>;

namespace node_ids {
inline constexpr const char* times = "times";
inline constexpr const char* values = "values";
inline constexpr const char* errors = "errors";
}  // namespace node_ids

inline bool is_input_node(const std::string& id) {
  return id == node_ids::times || id == node_ids::values || id == node_ids::errors;
}

/// Dependency results handed to a node's eval function, in `deps` order.
class NodeArgs {
 public:
  explicit NodeArgs(std::vector<const Value*> args) : args_(std::move(args)) {}

  std::size_t size() const { return args_.size(); }
  const Value& operator[](std::size_t i) const { return *args_[i]; }

  double scalar(std::size_t i) const {
    if (const auto* d = std::get_if<double>(args_[i])) return *d;
    throw ValidationError("argument " + std::to_string(i) + " is not a scalar");
  }
  std::span<const double> array(std::size_t i) const {
    if (const auto* v = std::get_if<std::vector<double>>(args_[i])) return *v;
    throw ValidationError("argument " + std::to_string(i) + " is not an array");
  }
  template <class T>
  const T& object(std::size_t i) const {
    if (const auto* a = std::get_if<std::any>(args_[i])) {
      if (const auto* p = std::any_cast<std::shared_ptr<const T>>(a)) return **p;
    }
    throw ValidationError("argument " + std::to_string(i) + " has unexpected type");
  }

 private:
  std::vector<const Value*> args_;
};

template <class T>
Value make_object_value(T object) {
  return Value{std::in_place_index<2>, std::make_shared<const T>(std::move(object))};
}

using EvalFn = std::function<Value(const NodeArgs&)>;

/// A node definition: what it consumes and how it computes.
struct NodeDef {
  std::vector<std::string> deps;
  EvalFn eval;
  std::string description;
};

using NodeDefs = std::map<std::string, NodeDef>;

/// Wraps a (times, values, errors) -> scalar function as a node definition.
/// `errors` is empty when the channel has none; `times` is always populated.
inline NodeDef custom_feature(
    std::function<double(std::span<const double>, std::span<const double>, std::span<const double>)> fn,
    std::string description = {}) {
  return NodeDef{{node_ids::times, node_ids::values, node_ids::errors},
                 [fn = std::move(fn)](const NodeArgs& a) -> Value {
                   return fn(a.array(0), a.array(1), a.array(2));
                 },
                 std::move(description)};
}

enum class NodeKind { input, function };

struct Node {
  std::string id;
  NodeKind kind = NodeKind::function;
  std::vector<std::string> deps;
  EvalFn eval;
};

/// Raised when a node's eval fails; carries the node id.
class NodeError : public Error {
 public:
  NodeError(std::string node, const std::string& cause)
      : Error("node '" + node + "' failed: " + cause), node_(std::move(node)), cause_(cause) {}
  const std::string& node() const { return node_; }
  const std::string& cause() const { return cause_; }

 private:
  std::string node_;
  std::string cause_;
};

class FeatureGraph {
 public:
  const std::map<std::string, Node>& nodes() const { return nodes_; }
  const std::vector<std::string>& outputs() const { return outputs_; }
  /// Function nodes in evaluation order.
  const std::vector<std::string>& order() const { return order_; }
  bool contains(const std::string& id) const { return nodes_.count(id) != 0; }

 private:
  friend FeatureGraph build_graph(const std::vector<std::string>&, const NodeDefs&, const NodeDefs&);

  std::map<std::string, Node> nodes_;
  std::vector<std::string> outputs_;
  std::vector<std::string> order_;
};

namespace detail {

inline void close_over(const std::string& id, const NodeDefs& custom, const NodeDefs& builtins,
                       std::map<std::string, Node>& nodes, std::vector<std::string>& path,
                       std::set<std::string>& on_path) {
  if (is_input_node(id)) return;
  if (on_path.count(id)) {
    std::string cycle;
    auto it = std::find(path.begin(), path.end(), id);
    for (; it != path.end(); ++it) cycle += *it + " -> ";
    throw ValidationError("dependency cycle: " + cycle + id);
  }
  if (nodes.count(id)) return;
  const NodeDef* def = nullptr;
  if (auto c = custom.find(id); c != custom.end()) def = &c->second;
  else if (auto b = builtins.find(id); b != builtins.end()) def = &b->second;
  if (!def) throw ValidationError("unknown feature: " + id);
  if (!def->eval) throw ValidationError("feature '" + id + "' has no eval function");

  path.push_back(id);
  on_path.insert(id);
  for (const auto& dep : def->deps) close_over(dep, custom, builtins, nodes, path, on_path);
  on_path.erase(id);
  path.pop_back();
  nodes.emplace(id, Node{id, NodeKind::function, def->deps, def->eval});
}

}  // namespace detail

/// Builds the graph holding `requested` outputs and the transitive closure of
/// their dependencies. Custom definitions may depend on builtins and on each
/// other but may not reuse a builtin or input name.
inline FeatureGraph build_graph(const std::vector<std::string>& requested, const NodeDefs& custom,
                                const NodeDefs& builtins) {
  for (const auto& [name, def] : custom) {
    if (is_input_node(name) || builtins.count(name))
      throw ValidationError("feature name collides with builtin: " + name);
  }
  FeatureGraph g;
  for (const char* in : {node_ids::times, node_ids::values, node_ids::errors})
    g.nodes_.emplace(in, Node{in, NodeKind::input, {}, {}});

  std::set<std::string> seen_outputs;
  for (const auto& name : requested) {
    if (is_input_node(name)) throw ValidationError("input node cannot be a feature: " + name);
    if (!seen_outputs.insert(name).second) throw ValidationError("duplicate feature: " + name);
    std::vector<std::string> path;
    std::set<std::string> on_path;
    detail::close_over(name, custom, builtins, g.nodes_, path, on_path);
    g.outputs_.push_back(name);
  }

  // Kahn's algorithm with a lexicographically ordered ready set.
  std::map<std::string, std::size_t> pending;
  std::map<std::string, std::vector<std::string>> dependents;
  std::set<std::string> ready;
  for (const auto& [id, node] : g.nodes_) {
    if (node.kind == NodeKind::input) continue;
    std::size_t n = 0;
    for (const auto& dep : node.deps) {
      if (is_input_node(dep)) continue;
      ++n;
      dependents[dep].push_back(id);
    }
    pending[id] = n;
    if (n == 0) ready.insert(id);
  }
  while (!ready.empty()) {
    std::string id = *ready.begin();
    ready.erase(ready.begin());
    g.order_.push_back(id);
    for (const auto& d : dependents[id])
      if (--pending[d] == 0) ready.insert(d);
  }
  return g;
}

/// Per-node evaluation counts, for instrumentation.
struct ExecutionStats {
  std::map<std::string, int> evaluations;

  int total() const {
    int n = 0;
    for (const auto& [id, count] : evaluations) n += count;
    return n;
  }
  int count(const std::string& id) const {
    auto it = evaluations.find(id);
    return it == evaluations.end() ? 0 : it->second;
  }
};

/// Output values plus, per failed output, the cause.
struct PartialResult {
  std::map<std::string, Value> values;
  std::map<std::string, std::string> failures;
};

namespace detail {

inline PartialResult run_graph(const FeatureGraph& g, const ChannelData& ch, ExecutionStats* stats,
                               bool strict) {
  PartialResult result;
  if (g.outputs().empty()) return result;

  std::map<std::string, Value> memo;
  memo.emplace(node_ids::times, ch.resolved_times());
  memo.emplace(node_ids::values, ch.values);
  memo.emplace(node_ids::errors, ch.errors);

  std::set<std::string> outputs(g.outputs().begin(), g.outputs().end());
  std::map<std::string, std::size_t> consumers;
  for (const auto& id : g.order())
    for (const auto& dep : g.nodes().at(id).deps) ++consumers[dep];

  std::map<std::string, std::string> failed;
  for (const auto& id : g.order()) {
    const Node& node = g.nodes().at(id);
    std::vector<const Value*> args;
    args.reserve(node.deps.size());
    std::string upstream_failure;
    for (const auto& dep : node.deps) {
      if (auto f = failed.find(dep); f != failed.end()) {
        upstream_failure = f->second;
        break;
      }
      args.push_back(&memo.at(dep));
    }

    if (!upstream_failure.empty()) {
      failed.emplace(id, upstream_failure);
    } else {
      if (stats) ++stats->evaluations[id];
      try {
        memo.insert_or_assign(id, node.eval(NodeArgs(std::move(args))));
      } catch (const std::exception& e) {
        if (strict) throw NodeError(id, e.what());
        failed.emplace(id, "node '" + id + "' failed: " + e.what());
      }
    }

    for (const auto& dep : node.deps) {
      if (--consumers[dep] == 0 && !outputs.count(dep) && !is_input_node(dep)) memo.erase(dep);
    }
  }

  for (const auto& id : g.outputs()) {
    if (auto f = failed.find(id); f != failed.end()) {
      result.failures.emplace(id, f->second);
    } else {
      result.values.emplace(id, std::move(memo.at(id)));
    }
  }
  return result;
}

}  // namespace detail

/// Evaluates every output of `g` on one channel. Each function node runs at
/// most once; a failing node aborts the call with a NodeError.
inline std::map<std::string, Value> execute(const FeatureGraph& g, const ChannelData& ch,
                                            ExecutionStats* stats = nullptr) {
  return detail::run_graph(g, ch, stats, true).values;
}

/// Like `execute`, but a failing node only fails the outputs downstream of it.
inline PartialResult execute_partial(const FeatureGraph& g, const ChannelData& ch,
                                     ExecutionStats* stats = nullptr) {
  return detail::run_graph(g, ch, stats, false);
}

}  // namespace cesium
