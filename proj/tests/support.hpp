#pragma once

// Helpers shared by the test binaries: scratch directories, subprocess
// capture and synthetic data.

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "cesium/core.hpp"
#include "cesium/persist/csv.hpp"

namespace testing_support {

namespace fs = std::filesystem;

/// A fresh directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "cesium") {
    std::string tmpl = (fs::temp_directory_path() / (tag + "-XXXXXX")).string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// Runs a shell command in `cwd`, capturing stdout and stderr separately.
inline RunResult run(const std::string& command, const fs::path& cwd) {
  const fs::path out = cwd / ".run_stdout", err = cwd / ".run_stderr";
  const std::string full = "cd '" + cwd.string() + "' && " + command + " >'" + out.string() + "' 2>'" +
                           err.string() + "'";
  const int status = std::system(full.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  fs::remove(out);
  fs::remove(err);
  return r;
}

inline std::string cli() { return std::string("'") + CESIUM_CLI_PATH + "'"; }

/// Labelled synthetic series: "periodic" ones are noisy sinusoids with
/// random period, "stochastic" ones random walks. Irregular times.
inline cesium::TimeSeries synthetic_series(std::mt19937_64& rng, std::size_t index, std::size_t length) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  cesium::TimeSeries ts;
  const bool periodic = index % 2 == 0;
  ts.name = std::string(periodic ? "periodic_" : "stochastic_") + std::to_string(index);
  ts.target = periodic ? "periodic" : "stochastic";
  cesium::ChannelData ch;
  const double freq = 0.05 + 0.2 * u(rng);
  double t = 0.0, walk = 0.0;
  for (std::size_t i = 0; i < length; ++i) {
    t += 0.2 + 0.6 * u(rng);
    ch.times.push_back(t);
    walk += g(rng);
    ch.values.push_back(periodic ? 3.0 * std::sin(2.0 * std::numbers::pi * freq * t) + 0.3 * g(rng) : walk);
    ch.errors.push_back(0.2 + 0.1 * u(rng));
  }
  ts.channels.push_back(std::move(ch));
  return ts;
}

inline std::vector<cesium::TimeSeries> synthetic_dataset(std::size_t n, std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<cesium::TimeSeries> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(synthetic_series(rng, i, length));
  return out;
}

/// Writes each series as <dir>/<name>.csv and returns the paths in order.
inline std::vector<fs::path> write_dataset(const std::vector<cesium::TimeSeries>& series, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<fs::path> paths;
  for (const auto& ts : series) {
    paths.push_back(dir / (ts.name + ".csv"));
    cesium::persist::write_time_series_csv(ts, paths.back());
  }
  return paths;
}

inline fs::path synthetic_data_dir() { return fs::path(CESIUM_DATA_DIR) / "synthetic"; }

}  // namespace testing_support
