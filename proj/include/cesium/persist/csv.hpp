#pragma once

// Time-series CSV files.
//
//   # key=value          optional metadata lines before the header
//   time,value,error     header: optional `time`, then `value` (+ `error`)
//   0,1.5,0.1            or value_0..value_{C-1} (+ error_0..error_{C-1})
//
// Comma separator, '.' decimal point, LF or CRLF line ends. The series name
// is the file stem. A `target` metadata key becomes the class label.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cesium/core.hpp"
#include "cesium/error.hpp"

namespace cesium::persist {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    cells.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace detail

/// Parses CSV text; `name` becomes the series name, `origin` prefixes errors.
inline TimeSeries parse_time_series_csv(std::string_view text, std::string name,
                                        const std::string& origin = "csv") {
  auto fail = [&](std::size_t line, const std::string& what) -> ValidationError {
    return ValidationError(origin + ": line " + std::to_string(line) + ": " + what);
  };

  TimeSeries ts;
  ts.name = std::move(name);

  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start <= text.size();) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }

  std::size_t i = 0;
  for (; i < lines.size(); ++i) {
    const auto line = detail::trim(lines[i]);
    if (line.empty()) continue;
    if (line.front() != '#') break;
    auto body = detail::trim(line.substr(1));
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) continue;  // plain comment
    const std::string key(detail::trim(body.substr(0, eq)));
    const auto raw = detail::trim(body.substr(eq + 1));
    if (key.empty()) throw fail(i + 1, "metadata key must be non-empty");
    if (key == "target") {
      ts.target = std::string(raw);
      continue;
    }
    double num = 0.0;
    if (detail::parse_double(raw, num)) ts.metadata[key] = num;
    else ts.metadata[key] = std::string(raw);
  }
  if (i >= lines.size()) throw fail(lines.size(), "missing header row");

  const std::size_t header_line = i + 1;
  const auto header = detail::split_commas(detail::trim(lines[i]));
  bool has_time = false;
  std::vector<int> value_col, error_col;  // per channel, -1 = absent
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto h = header[c];
    auto channel_of = [&](std::string_view prefix) -> int {
      if (!h.starts_with(prefix)) return -2;
      auto rest = h.substr(prefix.size());
      if (rest.empty()) return -1;
      if (rest.front() != '_') return -2;
      rest.remove_prefix(1);
      int idx = 0;
      const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), idx);
      if (ec != std::errc() || ptr != rest.data() + rest.size() || idx < 0) return -2;
      return idx;
    };
    if (h == "time") {
      if (c != 0) throw fail(header_line, "`time` must be the first column");
      has_time = true;
    } else if (int v = channel_of("value"); v != -2) {
      const std::size_t ch = v < 0 ? 0 : static_cast<std::size_t>(v);
      if (value_col.size() <= ch) value_col.resize(ch + 1, -1);
      if (value_col[ch] != -1) throw fail(header_line, "duplicate column " + std::string(h));
      value_col[ch] = static_cast<int>(c);
    } else if (int e = channel_of("error"); e != -2) {
      const std::size_t ch = e < 0 ? 0 : static_cast<std::size_t>(e);
      if (error_col.size() <= ch) error_col.resize(ch + 1, -1);
      if (error_col[ch] != -1) throw fail(header_line, "duplicate column " + std::string(h));
      error_col[ch] = static_cast<int>(c);
    } else {
      throw fail(header_line, "unknown column " + std::string(h));
    }
  }
  if (value_col.empty()) throw fail(header_line, "no value column");
  for (std::size_t c = 0; c < value_col.size(); ++c)
    if (value_col[c] == -1) throw fail(header_line, "missing column value_" + std::to_string(c));
  if (error_col.size() > value_col.size()) throw fail(header_line, "error column without value column");
  error_col.resize(value_col.size(), -1);

  const std::size_t n_channels = value_col.size();
  ts.channels.resize(n_channels);
  std::vector<double> times;
  for (++i; i < lines.size(); ++i) {
    const auto line = detail::trim(lines[i]);
    if (line.empty()) continue;
    const auto cells = detail::split_commas(line);
    if (cells.size() != header.size())
      throw fail(i + 1, "expected " + std::to_string(header.size()) + " cells, found " +
                            std::to_string(cells.size()));
    auto number = [&](std::size_t col) {
      double x = 0.0;
      if (!detail::parse_double(cells[col], x))
        throw fail(i + 1, "non-numeric cell '" + std::string(cells[col]) + "'");
      return x;
    };
    if (has_time) {
      const double t = number(0);
      if (!times.empty() && !(t > times.back())) throw fail(i + 1, "times not strictly increasing");
      times.push_back(t);
    }
    for (std::size_t c = 0; c < n_channels; ++c) {
      ts.channels[c].values.push_back(number(static_cast<std::size_t>(value_col[c])));
      if (error_col[c] >= 0) {
        const double e = number(static_cast<std::size_t>(error_col[c]));
        if (!(e > 0.0)) throw fail(i + 1, "errors must be > 0");
        ts.channels[c].errors.push_back(e);
      }
    }
  }
  if (ts.channels[0].values.empty()) throw fail(lines.size(), "no data rows");
  if (has_time)
    for (auto& ch : ts.channels) ch.times = times;
  return ts;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path.string());
  return std::move(ss).str();
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

inline TimeSeries read_time_series_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  return parse_time_series_csv(text, path.stem().string(), path.string());
}

namespace detail {

inline std::string format_double(double x) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Serializes a series in the reader's format. Channels must share their
/// time grid and error presence.
inline std::string format_time_series_csv(const TimeSeries& ts) {
  if (ts.channels.empty()) throw ValidationError("series has no channels");
  const auto& first = ts.channels.front();
  const bool multi = ts.channels.size() > 1;
  for (const auto& ch : ts.channels) {
    if (ch.times != first.times || ch.has_errors() != first.has_errors() || ch.size() != first.size())
      throw ValidationError("channels must share times, length and error presence to be written as CSV");
  }
  std::string out;
  if (ts.target) out += "# target=" + *ts.target + "\n";
  for (const auto& [key, value] : ts.metadata) {
    out += "# " + key + "=";
    out += std::holds_alternative<double>(value) ? detail::format_double(std::get<double>(value))
                                                 : std::get<std::string>(value);
    out += "\n";
  }
  std::vector<std::string> cols;
  if (first.has_times()) cols.push_back("time");
  for (std::size_t c = 0; c < ts.channels.size(); ++c) {
    const std::string suffix = multi ? "_" + std::to_string(c) : "";
    cols.push_back("value" + suffix);
    if (first.has_errors()) cols.push_back("error" + suffix);
  }
  for (std::size_t c = 0; c < cols.size(); ++c) out += (c ? "," : "") + cols[c];
  out += "\n";
  for (std::size_t i = 0; i < first.size(); ++i) {
    bool lead = true;
    auto put = [&](double x) {
      if (!lead) out += ",";
      out += detail::format_double(x);
      lead = false;
    };
    if (first.has_times()) put(first.times[i]);
    for (const auto& ch : ts.channels) {
      put(ch.values[i]);
      if (ch.has_errors()) put(ch.errors[i]);
    }
    out += "\n";
  }
  return out;
}

inline void write_time_series_csv(const TimeSeries& ts, const std::filesystem::path& path) {
  write_file(path, format_time_series_csv(ts));
}

}  // namespace cesium::persist
