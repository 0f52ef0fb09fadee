#pragma once

// .kmodel layout (text, '\n'-terminated lines):
//   1. JSON header: format, version, precision, architecture, layout,
//      classes, training seed/split, tensor names and shapes
//   2. one JSON number array per tensor, in header order, shortest
//      round-trip decimal rendering; then the input offset, if present
//   3. "crc32 xxxxxxxx": CRC-32 of every byte before this line

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <string_view>
#include <type_traits>

#include <json.hpp>
#include <zlib.h>

#include "kpaction/detail/numeric_text.hpp"
#include "kpaction/error.hpp"
#include "kpaction/keypoints_io.hpp"
#include "kpaction/train_eval/train.hpp"

namespace kpaction {

inline constexpr int kModelFormatVersion = 1;

enum class Precision { f64, f32 };

inline std::string to_string(Precision p) { return p == Precision::f64 ? "f64" : "f32"; }

inline Precision precision_from_string(const std::string& s) {
  if (s == "f64") return Precision::f64;
  if (s == "f32") return Precision::f32;
  throw ContractError("unknown precision '" + s + "' (expected f64 or f32)");
}

template <class T>
constexpr Precision precision_of() {
  static_assert(std::is_same_v<T, double> || std::is_same_v<T, float>, "models are stored as f64 or f32");
  return std::is_same_v<T, double> ? Precision::f64 : Precision::f32;
}

namespace detail {

inline std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

inline nlohmann::ordered_json arch_to_json(const neural::ArchConfig& a) {
  nlohmann::ordered_json j;
  j["kind"] = neural::to_string(a.kind);
  j["recurrent_units"] = a.recurrent_units;
  j["hidden_units"] = a.hidden_units;
  j["hidden_activation"] = neural::to_string(a.hidden_activation);
  j["pool"] = neural::to_string(a.pool);
  j["input_dim"] = a.input_dim;
  j["window"] = a.window;
  j["class_count"] = a.class_count;
  return j;
}

inline neural::ArchConfig arch_from_json(const nlohmann::json& j) {
  neural::ArchConfig a;
  a.kind = neural::model_kind_from_string(j.at("kind").get<std::string>());
  a.recurrent_units = j.at("recurrent_units").get<std::vector<std::size_t>>();
  a.hidden_units = j.at("hidden_units").get<std::vector<std::size_t>>();
  a.hidden_activation = neural::activation_from_string(j.at("hidden_activation").get<std::string>());
  a.pool = neural::pool_kind_from_string(j.at("pool").get<std::string>());
  a.input_dim = j.at("input_dim").get<std::size_t>();
  a.window = j.at("window").get<std::size_t>();
  a.class_count = j.at("class_count").get<std::size_t>();
  a.validate();
  return a;
}

struct ModelHeader {
  nlohmann::json json;
  Precision precision = Precision::f64;
};

inline ModelHeader read_model_header(std::string_view first_line) {
  ModelHeader h;
  try {
    h.json = nlohmann::json::parse(first_line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, std::string("malformed model header: ") + e.what());
  }
  if (!h.json.is_object() || h.json.value("format", "") != "kmodel") throw ParseError(1, "not a kmodel file");
  if (!h.json.contains("version") || !h.json["version"].is_number_integer()) throw ParseError(1, "model header has no version");
  const auto version = h.json["version"].get<long long>();
  if (version != kModelFormatVersion) {
    throw VersionMismatchError("model format version " + std::to_string(version) + " is not supported (expected " +
                               std::to_string(kModelFormatVersion) + ")");
  }
  try {
    h.precision = precision_from_string(h.json.at("precision").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, std::string("malformed model header: ") + e.what());
  } catch (const ContractError& e) {
    throw ParseError(1, e.what());
  }
  return h;
}

}  // namespace detail

template <class T>
std::string serialize_model(const TrainedModel<T>& m) {
  m.net.arch.validate();
  nlohmann::ordered_json header;
  header["format"] = "kmodel";
  header["version"] = kModelFormatVersion;
  header["precision"] = to_string(precision_of<T>());
  header["architecture"] = detail::arch_to_json(m.net.arch);
  std::string layout;
  detail::append_layout_json(layout, m.layout);
  header["layout"] = nlohmann::ordered_json::parse(layout);
  header["classes"] = m.classes;
  header["training"] = {{"seed", m.seed}, {"train_fraction", m.train_fraction}};
  auto tensors = nlohmann::ordered_json::array();
  const auto names = m.net.parameter_names();
  const auto shapes = m.net.parameter_shapes();
  for (std::size_t i = 0; i < names.size(); ++i) {
    tensors.push_back({{"name", names[i]}, {"shape", {shapes[i].first, shapes[i].second}}});
  }
  header["tensors"] = tensors;
  header["input_offset"] = !m.net.input_offset.empty();

  std::string out = header.dump();
  out += '\n';
  for (auto values : m.net.parameters()) {
    out += '[';
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (k) out += ',';
      detail::append_number(out, values[k]);
    }
    out += "]\n";
  }
  if (!m.net.input_offset.empty()) {
    out += '[';
    for (std::size_t k = 0; k < m.net.input_offset.size(); ++k) {
      if (k) out += ',';
      detail::append_number(out, m.net.input_offset[k]);
    }
    out += "]\n";
  }
  char crc[32];
  std::snprintf(crc, sizeof crc, "crc32 %08x\n", detail::crc32_of(out));
  out += crc;
  return out;
}

/// Precision recorded in a serialized model's header.
inline Precision model_precision(std::string_view bytes) {
  return detail::read_model_header(bytes.substr(0, bytes.find('\n'))).precision;
}

/// Strict inverse of serialize_model: version, checksum and every tensor
/// shape are verified before a model is returned.
template <class T>
TrainedModel<T> deserialize_model(std::string_view bytes) {
  if (bytes.empty()) throw ParseError(1, "empty model file");
  if (bytes.back() != '\n') throw ChecksumError("model file is truncated: no final newline");
  const auto lines = detail::split_lines(bytes);
  auto header = detail::read_model_header(lines[0]);
  if (header.precision != precision_of<T>()) {
    throw ContractError("model is stored as " + to_string(header.precision) + ", requested " + to_string(precision_of<T>()));
  }

  const auto& last = lines.back();
  if (last.size() != 14 || last.substr(0, 6) != "crc32 ") throw ChecksumError("model file is truncated: missing checksum line");
  const std::size_t body_len = static_cast<std::size_t>(last.data() - bytes.data());
  char expected[9];
  std::snprintf(expected, sizeof expected, "%08x", detail::crc32_of(bytes.substr(0, body_len)));
  if (last.substr(6) != std::string_view(expected, 8)) throw ChecksumError("model checksum mismatch");

  TrainedModel<T> m;
  bool has_offset = false;
  try {
    const auto& j = header.json;
    m.net = neural::Model<T>::zeros(detail::arch_from_json(j.at("architecture")));
    m.layout = detail::layout_from_json(j.at("layout"), 1);
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.seed = j.at("training").at("seed").get<std::uint64_t>();
    m.train_fraction = j.at("training").at("train_fraction").get<double>();
    has_offset = j.value("input_offset", false);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, std::string("malformed model header: ") + e.what());
  } catch (const ContractError& e) {
    throw ParseError(1, e.what());
  }
  if (m.classes.size() != m.net.arch.class_count) throw ParseError(1, "class list does not match class_count");
  if (m.layout.total_dim() != m.net.arch.input_dim) throw ParseError(1, "layout does not match input_dim");

  auto params = m.net.parameters();
  if (has_offset) {
    m.net.input_offset.assign(m.net.arch.input_dim, T(0));
    params.emplace_back(m.net.input_offset);
  }
  if (lines.size() != params.size() + 2) throw ParseError(0, "expected " + std::to_string(params.size()) + " tensor lines");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto values = detail::parse_number_array<T>(lines[i + 1], i + 2);
    if (values.size() != params[i].size()) {
      throw ParseError(i + 2, "tensor has " + std::to_string(values.size()) + " values, expected " + std::to_string(params[i].size()));
    }
    std::copy(values.begin(), values.end(), params[i].begin());
  }
  return m;
}

template <class T>
void save_model(const TrainedModel<T>& m, const std::filesystem::path& path) {
  detail::write_file(path, serialize_model(m));
}

template <class T>
TrainedModel<T> load_model(const std::filesystem::path& path) {
  return deserialize_model<T>(detail::read_file(path));
}

}  // namespace kpaction
