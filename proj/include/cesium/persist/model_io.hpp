#pragma once

// Trained-model archives. Structure goes in the JSON header; every float64 the
// model computes with (training matrix, thresholds, leaf distributions) goes
// in the binary payload so a round trip is bit-exact.
//
// Forest payload, per node in order: column, threshold, left, right, then the
// class distribution for leaves only.

#include <filesystem>
#include <string>

#include "cesium/learn/model.hpp"
#include "cesium/persist/archive.hpp"

namespace cesium::persist {

namespace detail {

inline json params_to_json(const learn::ParamMap& p) {
  json out = json::object();
  for (const auto& [k, v] : p) out[k] = v;
  return out;
}

inline learn::ParamMap params_from_json(const json& j) {
  learn::ParamMap p;
  for (const auto& [k, v] : j.items()) p[k] = v.get<double>();
  return p;
}

class PayloadReader {
 public:
  explicit PayloadReader(std::string_view bytes) : bytes_(bytes) {}
  double next() {
    if ((pos_ + 1) * 8 > bytes_.size()) throw FormatError("dimension mismatch");
    return read_f64(bytes_, pos_++);
  }
  int next_index() {
    const double x = next();
    if (x != std::floor(x) || x < -1 || x > 2e9) throw FormatError("malformed tree node");
    return static_cast<int>(x);
  }
  bool done() const { return pos_ * 8 == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_model(const learn::TrainedModel& m) {
  json h;
  h["kind"] = "model";
  h["learner"] = learn::to_string(m.spec.kind);
  h["params"] = detail::params_to_json(m.spec.params);
  json grid = json::object();
  for (const auto& [k, values] : m.spec.param_grid) grid[k] = values;
  h["param_grid"] = std::move(grid);
  h["cv_folds"] = m.spec.cv_folds;
  h["seed"] = m.spec.seed;
  h["classes"] = m.classes;
  h["layout"] = m.layout;
  json cv = json::array();
  for (const auto& r : m.cv_results)
    cv.push_back({{"params", detail::params_to_json(r.params)}, {"mean_accuracy", r.mean_accuracy}});
  h["cv_results"] = std::move(cv);

  std::string payload;
  if (const auto* knn = std::get_if<learn::KnnState>(&m.state)) {
    h["state"] = {{"n_neighbors", knn->n_neighbors}, {"n_cols", knn->n_cols}, {"labels", knn->labels}};
    append_f64(payload, knn->X);
  } else {
    const auto& forest = std::get<learn::ForestState>(m.state);
    json sizes = json::array();
    for (const auto& tree : forest.trees) {
      sizes.push_back(tree.nodes.size());
      for (const auto& node : tree.nodes) {
        append_f64(payload, static_cast<double>(node.column));
        append_f64(payload, node.threshold);
        append_f64(payload, static_cast<double>(node.left));
        append_f64(payload, static_cast<double>(node.right));
        if (node.is_leaf()) append_f64(payload, node.distribution);
      }
    }
    h["state"] = {{"n_classes", forest.n_classes}, {"tree_sizes", std::move(sizes)}};
  }
  return encode_archive(std::move(h), payload);
}

inline learn::TrainedModel decode_model(std::string_view bytes) {
  RawArchive raw = decode_archive(bytes, "model");
  verify_payload(raw);
  const json& h = raw.header;
  learn::TrainedModel m;
  try {
    m.spec.kind = learn::learner_kind_from_string(h.at("learner").get<std::string>());
    m.spec.params = detail::params_from_json(h.at("params"));
    for (const auto& [k, v] : h.at("param_grid").items()) m.spec.param_grid[k] = v.get<std::vector<double>>();
    m.spec.cv_folds = h.at("cv_folds").get<std::size_t>();
    m.spec.seed = h.at("seed").get<std::uint64_t>();
    m.classes = h.at("classes").get<std::vector<std::string>>();
    m.layout = h.at("layout").get<std::vector<std::string>>();
    for (const auto& r : h.at("cv_results"))
      m.cv_results.push_back({detail::params_from_json(r.at("params")), r.at("mean_accuracy").get<double>()});

    const json& st = h.at("state");
    detail::PayloadReader in(raw.payload);
    if (m.spec.kind == learn::LearnerKind::knn) {
      learn::KnnState knn;
      knn.n_neighbors = st.at("n_neighbors").get<std::size_t>();
      knn.n_cols = st.at("n_cols").get<std::size_t>();
      knn.labels = st.at("labels").get<std::vector<std::size_t>>();
      knn.X.resize(knn.labels.size() * knn.n_cols);
      for (double& x : knn.X) x = in.next();
      for (std::size_t l : knn.labels)
        if (l >= m.classes.size()) throw FormatError("label index out of range");
      m.state = std::move(knn);
    } else {
      learn::ForestState forest;
      forest.n_classes = st.at("n_classes").get<std::size_t>();
      for (const auto& size : st.at("tree_sizes")) {
        learn::Tree tree;
        tree.nodes.resize(size.get<std::size_t>());
        for (auto& node : tree.nodes) {
          node.column = in.next_index();
          node.threshold = in.next();
          node.left = in.next_index();
          node.right = in.next_index();
          if (node.is_leaf()) {
            node.distribution.resize(forest.n_classes);
            for (double& p : node.distribution) p = in.next();
          }
        }
        for (const auto& node : tree.nodes) {
          if (node.is_leaf()) continue;
          const auto n = static_cast<int>(tree.nodes.size());
          if (node.left <= 0 || node.right <= 0 || node.left >= n || node.right >= n ||
              static_cast<std::size_t>(node.column) >= m.layout.size())
            throw FormatError("malformed tree node");
        }
        if (tree.nodes.empty()) throw FormatError("empty tree");
        forest.trees.push_back(std::move(tree));
      }
      m.state = std::move(forest);
    }
    if (!in.done()) throw FormatError("dimension mismatch");
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed header: ") + e.what());
  }
  return m;
}

inline void save_model(const learn::TrainedModel& m, const std::filesystem::path& path) {
  write_file(path, encode_model(m));
}

inline learn::TrainedModel load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

}  // namespace cesium::persist
