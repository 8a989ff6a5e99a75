#pragma once

// Prediction files are CSV:
//
//   name,status,prediction[,p_<class>...]
//
// status is "ok" or "unpredictable" (prediction and probabilities left
// empty). Probability columns appear only when probabilities were requested.

#include <filesystem>
#include <string>
#include <vector>

#include "cesium/learn/model.hpp"
#include "cesium/persist/csv.hpp"

namespace cesium::persist {

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

inline std::string format_predictions(const std::vector<learn::Prediction>& preds,
                                      const std::vector<std::string>& classes, bool with_probs) {
  std::string out = "name,status,prediction";
  if (with_probs)
    for (const auto& c : classes) out += "," + detail::csv_field("p_" + c);
  out += "\n";
  for (const auto& p : preds) {
    out += detail::csv_field(p.name);
    if (!p.label) {
      out += ",unpredictable,";
      if (with_probs) out += std::string(classes.size(), ',');
    } else {
      out += ",ok," + detail::csv_field(*p.label);
      if (with_probs)
        for (double x : p.probabilities) out += "," + detail::format_double(x);
    }
    out += "\n";
  }
  return out;
}

inline void save_predictions(const std::vector<learn::Prediction>& preds, const std::vector<std::string>& classes,
                             bool with_probs, const std::filesystem::path& path) {
  write_file(path, format_predictions(preds, classes, with_probs));
}

}  // namespace cesium::persist
