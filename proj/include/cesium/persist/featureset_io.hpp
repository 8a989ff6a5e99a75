#pragma once

#include <filesystem>
#include <string>

#include "cesium/core.hpp"
#include "cesium/persist/archive.hpp"

namespace cesium::persist {

inline json metadata_to_json(const Metadata& meta) {
  json out = json::object();
  for (const auto& [key, value] : meta) {
    if (const auto* d = std::get_if<double>(&value)) {
      if (!std::isfinite(*d)) throw ValidationError("metadata '" + key + "' is not finite");
      out[key] = *d;
    } else {
      out[key] = std::get<std::string>(value);
    }
  }
  return out;
}

inline Metadata metadata_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("metadata entry is not an object");
  Metadata meta;
  for (const auto& [key, value] : j.items()) {
    if (value.is_string()) meta[key] = value.get<std::string>();
    else if (value.is_number()) meta[key] = value.get<double>();
    else throw FormatError("metadata '" + key + "' must be a string or number");
  }
  return meta;
}

inline std::string encode_featureset(const FeatureSet& fs) {
  json header;
  header["kind"] = "featureset";
  header["series_names"] = fs.series_names();
  header["n_channels"] = fs.n_channels();
  header["feature_names"] = fs.feature_names();
  json targets = json::array();
  json metadata = json::array();
  for (std::size_t s = 0; s < fs.n_series(); ++s) {
    targets.push_back(fs.target(s) ? json(*fs.target(s)) : json(nullptr));
    metadata.push_back(metadata_to_json(fs.metadata(s)));
  }
  header["targets"] = std::move(targets);
  header["metadata"] = std::move(metadata);
  std::string payload;
  append_f64(payload, fs.values());
  return encode_archive(std::move(header), payload);
}

inline FeatureSet decode_featureset(std::string_view bytes) {
  RawArchive raw = decode_archive(bytes, "featureset");
  const json& h = raw.header;
  std::vector<std::string> series, features;
  std::size_t channels = 0;
  try {
    series = h.at("series_names").get<std::vector<std::string>>();
    features = h.at("feature_names").get<std::vector<std::string>>();
    channels = h.at("n_channels").get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed header: ") + e.what());
  }
  const std::size_t expected = series.size() * channels * features.size() * 8;
  if (raw.payload.size() != expected) throw FormatError("dimension mismatch");
  verify_payload(raw);

  FeatureSet fs;
  try {
    fs = FeatureSet(std::move(series), channels, std::move(features));
  } catch (const ValidationError& e) {
    throw FormatError(std::string("invalid feature set: ") + e.what());
  }
  auto values = fs.values();
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = read_f64(raw.payload, i);

  const json targets = h.value("targets", json::array());
  const json metadata = h.value("metadata", json::array());
  if (!targets.is_array() || targets.size() != fs.n_series() || !metadata.is_array() ||
      metadata.size() != fs.n_series())
    throw FormatError("dimension mismatch");
  for (std::size_t s = 0; s < fs.n_series(); ++s) {
    if (targets[s].is_string()) fs.set_target(s, targets[s].get<std::string>());
    else if (!targets[s].is_null()) throw FormatError("target must be a string or null");
    fs.set_metadata(s, metadata_from_json(metadata[s]));
  }
  return fs;
}

inline void save_featureset(const FeatureSet& fs, const std::filesystem::path& path) {
  write_file(path, encode_featureset(fs));
}

inline FeatureSet load_featureset(const std::filesystem::path& path) {
  return decode_featureset(read_file(path));
}

}  // namespace cesium::persist
