#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kpaction/detail/numeric_text.hpp"
#include "kpaction/error.hpp"
#include "kpaction/keypoints.hpp"

namespace kpaction {

inline constexpr int kSequenceFormatVersion = 1;
inline constexpr int kManifestVersion = 1;

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for '" + path.string() + "'");
  return data;
}

inline void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

/// Splits on '\n'. A single trailing newline does not produce an empty line.
inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

inline std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

inline void append_layout_json(std::string& out, const LandmarkLayout& layout) {
  out += '[';
  bool first = true;
  for (const auto& s : layout.segments()) {
    if (!first) out += ',';
    first = false;
    out += '[';
    out += json_string(s.name);
    out += ',';
    out += std::to_string(s.landmark_count);
    out += ',';
    out += std::to_string(s.values_per_landmark);
    out += ']';
  }
  out += ']';
}

inline LandmarkLayout layout_from_json(const nlohmann::json& j, std::size_t line) {
  if (!j.is_array() || j.empty()) throw ParseError(line, "'layout' must be a non-empty array");
  std::vector<LandmarkSegment> segments;
  for (const auto& entry : j) {
    if (!entry.is_array() || entry.size() != 3 || !entry[0].is_string() || !entry[1].is_number_unsigned() ||
        !entry[2].is_number_unsigned()) {
      throw ParseError(line, "layout entries must be [name, landmark_count, values_per_landmark]");
    }
    segments.push_back({entry[0].get<std::string>(), entry[1].get<std::size_t>(), entry[2].get<std::size_t>()});
  }
  try {
    return LandmarkLayout(std::move(segments));
  } catch (const ContractError& e) {
    throw ParseError(line, e.what());
  }
}

inline std::vector<std::string> string_list_from_json(const nlohmann::json& j, std::size_t line, const char* key) {
  if (!j.is_array()) throw ParseError(line, std::string("'") + key + "' must be an array of strings or null");
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string()) throw ParseError(line, std::string("'") + key + "' must be an array of strings or null");
    out.push_back(e.get<std::string>());
  }
  return out;
}

struct SequenceHeader {
  LandmarkLayout layout;
  double fps = 0.0;
  std::optional<std::string> label;
  std::optional<std::vector<std::string>> classes;
};

inline SequenceHeader parse_sequence_header(std::string_view text, std::size_t line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(line, std::string("malformed header: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line, "malformed header: expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "version" && key != "layout" && key != "fps" && key != "label" && key != "classes") {
      throw ParseError(line, "malformed header: unknown key '" + key + "'");
    }
  }
  if (!j.contains("version") || !j["version"].is_number_integer()) throw ParseError(line, "malformed header: missing integer 'version'");
  if (j["version"].get<long long>() != kSequenceFormatVersion) {
    throw ParseError(line, "unsupported sequence format version " + j["version"].dump());
  }
  if (!j.contains("layout")) throw ParseError(line, "malformed header: missing 'layout'");
  if (!j.contains("fps") || !j["fps"].is_number()) throw ParseError(line, "malformed header: missing numeric 'fps'");

  SequenceHeader h;
  h.layout = layout_from_json(j["layout"], line);
  h.fps = j["fps"].get<double>();
  if (!(h.fps > 0.0) || !std::isfinite(h.fps)) throw ParseError(line, "malformed header: 'fps' must be positive");
  if (j.contains("label") && !j["label"].is_null()) {
    if (!j["label"].is_string()) throw ParseError(line, "malformed header: 'label' must be a string or null");
    h.label = j["label"].get<std::string>();
  }
  if (j.contains("classes") && !j["classes"].is_null()) h.classes = string_list_from_json(j["classes"], line, "classes");
  return h;
}

}  // namespace detail

/// Parses a .kseq document (JSON Lines: header object, then one
/// [timestamp, v1, ..., vD] array per frame). Errors carry the 1-based line.
inline KeypointSequence parse_sequence_file(std::string_view bytes) {
  const auto lines = detail::split_lines(bytes);
  if (lines.empty() || detail::trim(lines[0]).empty()) throw ParseError(1, "malformed header: file is empty");

  auto header = detail::parse_sequence_header(lines[0], 1);
  KeypointSequence seq;
  seq.layout = std::move(header.layout);
  seq.fps = header.fps;
  seq.classes = std::move(header.classes);
  if (header.label) {
    if (!seq.classes) throw ParseError(1, "malformed header: 'label' requires 'classes'");
    const auto it = std::find(seq.classes->begin(), seq.classes->end(), *header.label);
    if (it == seq.classes->end()) throw ParseError(1, "malformed header: label '" + *header.label + "' is not in 'classes'");
    seq.label = static_cast<std::size_t>(it - seq.classes->begin());
  }

  const std::size_t dim = seq.layout.total_dim();
  seq.frames.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    auto values = detail::parse_number_array<double>(lines[i], line_no);
    if (values.size() != dim + 1) {
      throw ParseError(line_no, "feature-length mismatch: expected " + std::to_string(dim) + " values after the timestamp, got " +
                                    std::to_string(values.empty() ? 0 : values.size() - 1));
    }
    FrameVector f;
    f.timestamp_s = values[0];
    if (f.timestamp_s < 0.0) throw ParseError(line_no, "negative timestamp");
    if (!seq.frames.empty() && !(f.timestamp_s > seq.frames.back().timestamp_s)) {
      throw ParseError(line_no, "timestamps must be strictly increasing");
    }
    f.features.assign(values.begin() + 1, values.end());
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

/// Canonical .kseq text. parse_sequence_file(write_sequence_file(s)) == s.
inline std::string write_sequence_file(const KeypointSequence& seq) {
  seq.validate();
  std::string out;
  out += "{\"version\":";
  out += std::to_string(kSequenceFormatVersion);
  out += ",\"layout\":";
  detail::append_layout_json(out, seq.layout);
  out += ",\"fps\":";
  detail::append_number(out, seq.fps);
  out += ",\"label\":";
  out += seq.label ? detail::json_string(*seq.label_name()) : "null";
  out += ",\"classes\":";
  if (seq.classes) {
    out += '[';
    for (std::size_t i = 0; i < seq.classes->size(); ++i) {
      if (i) out += ',';
      out += detail::json_string((*seq.classes)[i]);
    }
    out += ']';
  } else {
    out += "null";
  }
  out += "}\n";
  for (const auto& f : seq.frames) {
    out += '[';
    detail::append_number(out, f.timestamp_s);
    for (double v : f.features) {
      out += ',';
      detail::append_number(out, v);
    }
    out += "]\n";
  }
  return out;
}

inline KeypointSequence load_sequence(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  try {
    return parse_sequence_file(bytes);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + std::string(e.what()));
  }
}

inline void save_sequence(const std::filesystem::path& path, const KeypointSequence& seq) {
  detail::write_file(path, write_sequence_file(seq));
}

/// Writes `<class>_<nnnn>.kseq` files plus manifest.json into `dir`.
inline void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  ds.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create directory '" + dir.string() + "'");

  nlohmann::ordered_json manifest;
  manifest["version"] = kManifestVersion;
  manifest["classes"] = ds.classes;
  manifest["files"] = nlohmann::ordered_json::array();
  std::vector<std::size_t> counters(ds.classes.size(), 0);
  for (const auto& s : ds.sequences) {
    const auto& cls = ds.classes[*s.label];
    std::string index = std::to_string(counters[*s.label]++);
    if (index.size() < 4) index.insert(0, 4 - index.size(), '0');
    const std::string name = cls + "_" + index + ".kseq";
    KeypointSequence copy = s;
    copy.classes = ds.classes;
    save_sequence(dir / name, copy);
    manifest["files"].push_back({{"file", name}, {"label", cls}});
  }
  detail::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

/// Reads a directory written by save_dataset (or any producer following the
/// same manifest layout). Labels come from the manifest.
inline Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw IoError("missing manifest '" + manifest_path.string() + "'");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(detail::read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, manifest_path.string() + ": " + e.what());
  }
  if (!manifest.is_object() || !manifest.contains("classes") || !manifest.contains("files") || !manifest["files"].is_array()) {
    throw ParseError(0, manifest_path.string() + ": expected object with 'classes' and 'files'");
  }
  if (manifest.contains("version") && manifest["version"] != kManifestVersion) {
    throw VersionMismatchError(manifest_path.string() + ": unsupported manifest version " + manifest["version"].dump());
  }

  Dataset ds;
  ds.classes = detail::string_list_from_json(manifest["classes"], 0, "classes");
  for (const auto& entry : manifest["files"]) {
    if (!entry.is_object() || !entry.contains("file") || !entry["file"].is_string()) {
      throw ParseError(0, manifest_path.string() + ": file entries need a 'file' string");
    }
    auto seq = load_sequence(dir / entry["file"].get<std::string>());
    std::optional<std::string> name = seq.label_name();
    if (entry.contains("label") && entry["label"].is_string()) {
      const auto manifest_label = entry["label"].get<std::string>();
      if (name && *name != manifest_label) {
        throw ParseError(0, entry["file"].get<std::string>() + ": label '" + *name + "' disagrees with manifest '" + manifest_label + "'");
      }
      name = manifest_label;
    }
    if (!name) throw ParseError(0, entry["file"].get<std::string>() + ": sequence has no label");
    const auto it = std::find(ds.classes.begin(), ds.classes.end(), *name);
    if (it == ds.classes.end()) throw ParseError(0, entry["file"].get<std::string>() + ": label '" + *name + "' not in manifest classes");
    seq.label = static_cast<std::size_t>(it - ds.classes.begin());
    seq.classes = ds.classes;
    ds.sequences.push_back(std::move(seq));
  }
  try {
    ds.validate();
  } catch (const ContractError& e) {
    throw ShapeError(dir.string() + ": " + e.what());
  }
  return ds;
}

}  // namespace kpaction
