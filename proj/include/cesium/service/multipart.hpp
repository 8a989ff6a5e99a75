#pragma once

// Minimal multipart/form-data reader for CSV uploads.

#include <string>
#include <string_view>
#include <vector>

#include "cesium/error.hpp"

namespace cesium::service {

struct FormPart {
  std::string name;
  std::string filename;  ///< empty for plain fields
  std::string body;
};

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
  return out;
}

/// Value of `key=` inside a header such as Content-Disposition, quoted or not.
inline std::string header_param(std::string_view header, std::string_view key) {
  const std::string h = lower(header);
  std::size_t pos = 0;
  const std::string needle = std::string(key) + "=";
  while ((pos = h.find(needle, pos)) != std::string::npos) {
    if (pos == 0 || h[pos - 1] == ' ' || h[pos - 1] == ';') break;
    pos += needle.size();
  }
  if (pos == std::string::npos) return {};
  std::size_t start = pos + needle.size();
  if (start < header.size() && header[start] == '"') {
    const std::size_t end = header.find('"', start + 1);
    if (end == std::string::npos) return {};
    return std::string(header.substr(start + 1, end - start - 1));
  }
  std::size_t end = header.find(';', start);
  if (end == std::string::npos) end = header.size();
  while (end > start && header[end - 1] == ' ') --end;
  return std::string(header.substr(start, end - start));
}

}  // namespace detail

inline std::string multipart_boundary(std::string_view content_type) {
  if (detail::lower(content_type).rfind("multipart/form-data", 0) != 0)
    throw ValidationError("expected multipart/form-data");
  std::string b = detail::header_param(content_type, "boundary");
  if (b.empty()) throw ValidationError("multipart boundary missing");
  return b;
}

inline std::vector<FormPart> parse_multipart(std::string_view body, const std::string& boundary) {
  const std::string delim = "--" + boundary;
  std::vector<FormPart> parts;
  std::size_t pos = body.find(delim);
  if (pos == std::string_view::npos) throw ValidationError("malformed multipart body");
  while (true) {
    pos += delim.size();
    if (body.substr(pos, 2) == "--") break;
    if (body.substr(pos, 2) != "\r\n") throw ValidationError("malformed multipart body");
    pos += 2;
    const std::size_t head_end = body.find("\r\n\r\n", pos);
    if (head_end == std::string_view::npos) throw ValidationError("malformed multipart part headers");
    FormPart part;
    std::string_view headers = body.substr(pos, head_end - pos);
    while (!headers.empty()) {
      std::size_t eol = headers.find("\r\n");
      std::string_view line = headers.substr(0, eol);
      headers = eol == std::string_view::npos ? std::string_view{} : headers.substr(eol + 2);
      if (detail::lower(line).rfind("content-disposition:", 0) == 0) {
        part.name = detail::header_param(line, "name");
        part.filename = detail::header_param(line, "filename");
      }
    }
    const std::size_t content = head_end + 4;
    const std::size_t next = body.find("\r\n" + delim, content);
    if (next == std::string_view::npos) throw ValidationError("unterminated multipart part");
    part.body.assign(body.substr(content, next - content));
    parts.push_back(std::move(part));
    pos = next + 2;
  }
  return parts;
}

}  // namespace cesium::service
