#pragma once

// Single-file binary container shared by feature-set and model archives:
//
//   <header length in bytes, ASCII decimal>\n
//   <UTF-8 JSON header>
//   <payload bytes>
//
// The header always carries `kind`, `schema_version` ("1"), `payload_bytes`
// and `payload_crc32` (CRC32 of the payload). Its last member is
// `header_crc32`, eight hex digits of the CRC32 of the header text with that
// member removed, so a corrupted byte anywhere in the file is caught.
// Numeric payloads are little-endian float64.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cesium/error.hpp"
#include "cesium/persist/hash.hpp"

namespace cesium::persist {

using json = nlohmann::json;

inline constexpr const char* schema_version = "1";

struct RawArchive {
  json header;
  std::string payload;
};

inline std::string encode_archive(json header, std::string_view payload) {
  header["schema_version"] = schema_version;
  header["payload_bytes"] = payload.size();
  header["payload_crc32"] = crc32_of(payload);
  header.erase("header_crc32");
  std::string text = header.dump();
  char hex[9];
  std::snprintf(hex, sizeof hex, "%08x", crc32_of(text));
  text.pop_back();
  text += std::string(",\"header_crc32\":\"") + hex + "\"}";
  std::string out = std::to_string(text.size()) + "\n";
  out.reserve(out.size() + text.size() + payload.size());
  out += text;
  out += payload;
  return out;
}

/// Splits an archive into header and payload and checks framing. The
/// checksum is verified separately by `verify_payload` so callers can report
/// dimension problems first.
inline RawArchive decode_archive(std::string_view bytes, std::string_view expected_kind) {
  const std::size_t nl = bytes.find('\n');
  if (nl == std::string_view::npos || nl == 0 || nl > 20) throw FormatError("malformed header length");
  std::size_t header_len = 0;
  for (char c : bytes.substr(0, nl)) {
    if (c < '0' || c > '9') throw FormatError("malformed header length");
    header_len = header_len * 10 + static_cast<std::size_t>(c - '0');
  }
  if (bytes.size() - nl - 1 < header_len) throw FormatError("truncated header");

  // Strip the trailing header_crc32 member and check it before parsing.
  std::string_view text = bytes.substr(nl + 1, header_len);
  constexpr std::string_view crc_key = ",\"header_crc32\":\"";
  constexpr std::size_t suffix_len = crc_key.size() + 8 + 2;
  if (text.size() < suffix_len + 1 || text.substr(text.size() - suffix_len, crc_key.size()) != crc_key ||
      text.substr(text.size() - 2) != "\"}")
    throw FormatError("header checksum mismatch");
  std::string stripped(text.substr(0, text.size() - suffix_len));
  stripped += '}';
  char hex[9];
  std::snprintf(hex, sizeof hex, "%08x", crc32_of(stripped));
  if (text.substr(text.size() - 10, 8) != std::string_view(hex, 8)) throw FormatError("header checksum mismatch");

  RawArchive raw;
  try {
    raw.header = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed header: ") + e.what());
  }
  if (!raw.header.is_object()) throw FormatError("malformed header: not an object");
  const auto version = raw.header.value("schema_version", json());
  if (!version.is_string() || version.get<std::string>() != schema_version)
    throw FormatError("unknown schema_version " + version.dump());
  if (raw.header.value("kind", std::string()) != expected_kind)
    throw FormatError("archive is not a " + std::string(expected_kind));
  const auto declared = raw.header.value("payload_bytes", json());
  if (!declared.is_number_unsigned()) throw FormatError("malformed header: payload_bytes");
  const std::size_t payload_bytes = declared.get<std::size_t>();

  const std::string_view payload = bytes.substr(nl + 1 + header_len);
  if (payload.size() < payload_bytes) throw FormatError("truncated payload");
  if (payload.size() > payload_bytes) throw FormatError("trailing bytes after payload");
  raw.payload.assign(payload);
  return raw;
}

inline void verify_payload(const RawArchive& raw) {
  const auto crc = raw.header.value("payload_crc32", json());
  if (!crc.is_number_unsigned() || crc.get<std::uint32_t>() != crc32_of(raw.payload))
    throw FormatError("checksum mismatch");
}

inline void append_f64(std::string& out, double x) {
  auto bits = std::bit_cast<std::uint64_t>(x);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xFF));
    bits >>= 8;
  }
}

inline void append_f64(std::string& out, std::span<const double> xs) {
  out.reserve(out.size() + 8 * xs.size());
  for (double x : xs) append_f64(out, x);
}

inline double read_f64(std::string_view bytes, std::size_t index) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i)
    bits = (bits << 8) | static_cast<unsigned char>(bytes[index * 8 + static_cast<std::size_t>(i)]);
  return std::bit_cast<double>(bits);
}

}  // namespace cesium::persist
