#pragma once

// Batch featurization: one FeatureGraph applied to every channel of every
// series, spread over a fixed pool of worker threads. Workers only write their
// own rows, so the result does not depend on the worker count or on the order
// in which tasks are picked up.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cesium/core.hpp"
#include "cesium/features.hpp"
#include "cesium/graph.hpp"
#include "cesium/persist/csv.hpp"

namespace cesium {

struct FeaturizeRequest {
  std::vector<std::string> features;
  NodeDefs custom_defs;
  FeatureParams params;
  std::size_t parallelism = 0;  ///< worker count; 0 means one per hardware thread
};

struct FileError {
  std::string path;
  std::string message;
};

/// Non-fatal problems found while featurizing.
struct FeaturizeDiagnostics {
  std::vector<std::string> warnings;
  std::vector<FileError> file_errors;
};

inline std::size_t resolve_workers(std::size_t requested, std::size_t tasks) {
  std::size_t n = requested;
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(n, std::max<std::size_t>(tasks, 1)));
}

/// Runs task(i) for i in [0, n) on `workers` threads pulling from a shared
/// counter. The first exception thrown by a task is rethrown.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& task) {
  workers = resolve_workers(workers, n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            task(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

namespace detail {

struct RowResult {
  std::vector<double> cells;  ///< [channel][feature]
  std::vector<std::string> warnings;
};

inline RowResult featurize_row(const FeatureGraph& graph, const std::vector<std::string>& features,
                               const TimeSeries& ts) {
  RowResult row;
  row.cells.assign(ts.n_channels() * features.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t c = 0; c < ts.n_channels(); ++c) {
    const PartialResult res = execute_partial(graph, ts.channels[c]);
    for (std::size_t f = 0; f < features.size(); ++f) {
      const auto& name = features[f];
      std::string problem;
      if (auto fail = res.failures.find(name); fail != res.failures.end()) {
        problem = fail->second;
      } else {
        const Value& v = res.values.at(name);
        const double* x = std::get_if<double>(&v);
        if (!x) problem = "feature did not produce a scalar";
        else if (!std::isfinite(*x)) problem = "feature produced a non-finite value";
        else row.cells[c * features.size() + f] = *x;
      }
      if (!problem.empty())
        row.warnings.push_back(ts.name + " channel " + std::to_string(c) + " " + name + ": " + problem);
    }
  }
  return row;
}

inline void check_request(const FeaturizeRequest& req) {
  if (req.features.empty()) throw ValidationError("feature list must be non-empty");
}

}  // namespace detail

/// Featurizes in-memory series. Every series must be valid and all must share
/// the same channel count. A feature that fails on one series leaves NaN in
/// that cell and adds a warning.
inline FeatureSet featurize_time_series(std::span<const TimeSeries> series, const FeaturizeRequest& req,
                                        FeaturizeDiagnostics* diag = nullptr) {
  detail::check_request(req);
  const FeatureGraph graph = build_feature_graph(req.features, req.custom_defs, req.params);
  const std::size_t n_channels = series.empty() ? 1 : series.front().n_channels();
  std::vector<std::string> names;
  for (const auto& ts : series) {
    if (auto v = validate_time_series(ts); !v.empty())
      throw ValidationError("series '" + ts.name + "' is invalid: " + v.front());
    if (ts.n_channels() != n_channels)
      throw ValidationError("series '" + ts.name + "' has " + std::to_string(ts.n_channels()) +
                            " channels, expected " + std::to_string(n_channels));
    names.push_back(ts.name);
  }

  FeatureSet fs(std::move(names), n_channels, req.features);
  std::vector<detail::RowResult> rows(series.size());
  parallel_for(series.size(), req.parallelism,
               [&](std::size_t i) { rows[i] = detail::featurize_row(graph, req.features, series[i]); });

  const std::size_t width = n_channels * req.features.size();
  for (std::size_t i = 0; i < series.size(); ++i) {
    std::copy(rows[i].cells.begin(), rows[i].cells.end(),
              fs.values().begin() + static_cast<std::ptrdiff_t>(i * width));
    fs.set_target(i, series[i].target);
    fs.set_metadata(i, series[i].metadata);
    if (diag) diag->warnings.insert(diag->warnings.end(), rows[i].warnings.begin(), rows[i].warnings.end());
  }
  return fs;
}

/// Featurizes CSV files, each read by the worker that featurizes it. Rows
/// follow `paths`; an unreadable file gives an all-NaN row named after the
/// file stem plus a file error. More than half the files failing is fatal.
/// `targets` (series name -> label) overrides labels read from the files.
inline FeatureSet featurize_data_files(const std::vector<std::filesystem::path>& paths,
                                       const FeaturizeRequest& req,
                                       const std::map<std::string, std::string>& targets = {},
                                       FeaturizeDiagnostics* diag = nullptr) {
  detail::check_request(req);
  const FeatureGraph graph = build_feature_graph(req.features, req.custom_defs, req.params);

  struct FileRow {
    std::optional<TimeSeries> series;
    std::string error;
    detail::RowResult row;
  };
  std::vector<FileRow> rows(paths.size());
  parallel_for(paths.size(), req.parallelism, [&](std::size_t i) {
    try {
      TimeSeries ts = persist::read_time_series_csv(paths[i]);
      if (auto v = validate_time_series(ts); !v.empty()) throw ValidationError(v.front());
      rows[i].row = detail::featurize_row(graph, req.features, ts);
      ts.channels.clear();  // only names, labels and metadata are kept
      rows[i].series = std::move(ts);
    } catch (const std::exception& e) {
      rows[i].error = e.what();
    }
  });

  std::size_t failures = 0;
  std::optional<std::size_t> n_channels;
  for (const auto& r : rows) {
    if (!r.series) {
      ++failures;
      continue;
    }
    const std::size_t c = r.row.cells.size() / req.features.size();
    if (n_channels && *n_channels != c)
      throw ValidationError("series '" + r.series->name + "' has " + std::to_string(c) +
                            " channels, expected " + std::to_string(*n_channels));
    n_channels = c;
  }
  if (!paths.empty() && 2 * failures > paths.size()) {
    std::string msg = std::to_string(failures) + " of " + std::to_string(paths.size()) + " files failed";
    for (std::size_t i = 0; i < paths.size(); ++i)
      if (!rows[i].series) {
        msg += "; " + paths[i].string() + ": " + rows[i].error;
        break;
      }
    throw IoError(msg);
  }

  std::vector<std::string> names;
  for (const auto& p : paths) names.push_back(p.stem().string());
  FeatureSet fs(std::move(names), n_channels.value_or(1), req.features);
  const std::size_t width = fs.n_channels() * req.features.size();
  for (std::size_t i = 0; i < paths.size(); ++i) {
    auto& r = rows[i];
    if (!r.series) {
      if (diag) diag->file_errors.push_back({paths[i].string(), r.error});
      continue;
    }
    std::copy(r.row.cells.begin(), r.row.cells.end(),
              fs.values().begin() + static_cast<std::ptrdiff_t>(i * width));
    fs.set_target(i, r.series->target);
    fs.set_metadata(i, r.series->metadata);
    if (diag) diag->warnings.insert(diag->warnings.end(), r.row.warnings.begin(), r.row.warnings.end());
  }
  for (std::size_t i = 0; i < fs.n_series(); ++i)
    if (auto t = targets.find(fs.series_names()[i]); t != targets.end()) fs.set_target(i, t->second);
  return fs;
}

}  // namespace cesium
