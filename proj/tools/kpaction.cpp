// kpaction: synth | train | eval | predict | gradcheck
//
// Every setting is a key with a default, optionally set by a JSON config
// file (--config) and overridden by --key value flags. Exit codes:
// 0 success, 1 config/contract error, 2 I/O error, 3 check failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kpaction/kpaction.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kpaction;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitIo = 2;
constexpr int kExitCheckFailed = 3;

enum class KeyType { integer, real, text, flag, uint_list };

struct KeySpec {
  std::string name;
  KeyType type;
  json fallback;  // null = no default (optional)
  std::string help;
};

/// Resolved settings for one subcommand: defaults < config file < flags.
class Settings {
 public:
  Settings(CLI::App* app, std::vector<KeySpec> keys) : keys_(std::move(keys)) {
    app->add_option("--config", config_path_, "JSON config file");
    for (const auto& k : keys_) {
      std::string dashed = k.name;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      std::string names = "--" + dashed;
      if (dashed != k.name) names += ",--" + k.name;
      if (k.type == KeyType::flag) {
        flags_[k.name] = app->add_flag(names, flag_values_[k.name], k.help);
      } else {
        flags_[k.name] = app->add_option(names, raw_[k.name], k.help);
      }
    }
  }

  void resolve() {
    for (const auto& k : keys_) values_[k.name] = k.fallback;
    if (!config_path_.empty()) {
      json file;
      try {
        file = json::parse(detail::read_file(config_path_));
      } catch (const json::exception& e) {
        throw ParseError(0, config_path_ + ": " + e.what());
      }
      if (!file.is_object()) throw ContractError(config_path_ + ": config must be a JSON object");
      for (const auto& [key, value] : file.items()) {
        const auto* spec = find(key);
        if (!spec) throw ContractError("unknown config key '" + key + "'");
        values_[key] = check_type(*spec, value);
      }
    }
    for (const auto& k : keys_) {
      if (flags_[k.name]->count() == 0) continue;
      if (k.type == KeyType::flag) {
        values_[k.name] = flag_values_[k.name];
      } else {
        values_[k.name] = parse_flag(k, raw_[k.name]);
      }
    }
  }

  bool has(const std::string& key) const { return !values_.at(key).is_null(); }

  void set_if_missing(const std::string& key, const json& value) {
    if (!has(key)) values_[key] = value;
  }

  long long integer(const std::string& key) const { return values_.at(key).get<long long>(); }
  std::size_t count(const std::string& key) const {
    const auto v = integer(key);
    if (v < 0) throw ContractError("invalid value for '" + key + "': must be >= 0");
    return static_cast<std::size_t>(v);
  }
  std::uint64_t seed(const std::string& key) const { return values_.at(key).is_number_unsigned() ? values_.at(key).get<std::uint64_t>() : static_cast<std::uint64_t>(count(key)); }
  double real(const std::string& key) const { return values_.at(key).get<double>(); }
  std::string text(const std::string& key) const { return values_.at(key).get<std::string>(); }
  bool flag(const std::string& key) const { return values_.at(key).get<bool>(); }
  std::vector<std::size_t> list(const std::string& key) const { return values_.at(key).get<std::vector<std::size_t>>(); }

  std::string required_path(const std::string& key) const {
    if (!has(key) || text(key).empty()) throw ContractError("missing required setting '" + key + "'");
    return text(key);
  }

 private:
  const KeySpec* find(const std::string& name) const {
    for (const auto& k : keys_) {
      if (k.name == name) return &k;
    }
    return nullptr;
  }

  static json check_type(const KeySpec& k, const json& v) {
    const auto bad = [&] { return ContractError("invalid value for '" + k.name + "': " + v.dump()); };
    if (v.is_null()) return v;
    switch (k.type) {
      case KeyType::integer:
        if (!v.is_number_integer()) throw bad();
        return v;
      case KeyType::real:
        if (!v.is_number()) throw bad();
        return v.get<double>();
      case KeyType::text:
        if (!v.is_string()) throw bad();
        return v;
      case KeyType::flag:
        if (!v.is_boolean()) throw bad();
        return v;
      case KeyType::uint_list:
        if (!v.is_array()) throw bad();
        for (const auto& e : v) {
          if (!e.is_number_unsigned()) throw bad();
        }
        return v;
    }
    return v;
  }

  static json parse_flag(const KeySpec& k, const std::string& raw) {
    const auto bad = [&] { return ContractError("invalid value for '" + k.name + "': '" + raw + "'"); };
    try {
      switch (k.type) {
        case KeyType::integer: {
          std::size_t used = 0;
          const long long v = std::stoll(raw, &used);
          if (used != raw.size()) throw bad();
          return v;
        }
        case KeyType::real: {
          std::size_t used = 0;
          const double v = std::stod(raw, &used);
          if (used != raw.size()) throw bad();
          return v;
        }
        case KeyType::text:
          return raw;
        case KeyType::uint_list: {
          json arr = json::array();
          std::stringstream ss(raw);
          std::string item;
          while (std::getline(ss, item, ',')) {
            std::size_t used = 0;
            const long long v = std::stoll(item, &used);
            if (used != item.size() || v < 0) throw bad();
            arr.push_back(static_cast<std::size_t>(v));
          }
          return arr;
        }
        case KeyType::flag:
          return true;
      }
    } catch (const std::logic_error&) {
      throw bad();
    }
    return raw;
  }

  std::vector<KeySpec> keys_;
  std::string config_path_;
  std::map<std::string, CLI::Option*> flags_;
  std::map<std::string, std::string> raw_;
  std::map<std::string, bool> flag_values_;
  std::map<std::string, json> values_;
};

// ---------------------------------------------------------------- synth

std::vector<KeySpec> synth_keys() {
  return {
      {"out", KeyType::text, nullptr, "output dataset directory"},
      {"seed", KeyType::integer, 42, "dataset seed"},
      {"dataset", KeyType::text, "gesture", "gesture | order_probe"},
      {"n_per_class", KeyType::integer, 100, "windows per class"},
      {"layout", KeyType::text, "pose_only", "pose_only | holistic_full"},
      {"fps", KeyType::real, 10.0, "frames per second"},
      {"window", KeyType::integer, 30, "frames per window"},
      {"noise_sigma", KeyType::real, 0.01, "Gaussian noise per value"},
      {"reader_x", KeyType::real, 0.42, "card reader x in [0,1]"},
      {"reader_y", KeyType::real, 0.42, "card reader y in [0,1]"},
      {"arc_amplitude", KeyType::real, 1.0, "reach fraction toward the reader"},
      {"walk_speed", KeyType::real, 0.01, "body translation per frame"},
  };
}

LandmarkLayout layout_named(const std::string& name) {
  if (name == "pose_only") return LandmarkLayout::pose_only();
  if (name == "holistic_full") return LandmarkLayout::holistic_full();
  throw ContractError("invalid value for 'layout': '" + name + "' (expected pose_only or holistic_full)");
}

synth::SynthConfig synth_config(const Settings& s) {
  synth::SynthConfig c;
  c.layout = layout_named(s.text("layout"));
  c.fps = s.real("fps");
  c.window = s.count("window");
  c.gesture.duration_frames = c.window;
  c.gesture.noise_sigma = s.real("noise_sigma");
  c.gesture.reader_position = {s.real("reader_x"), s.real("reader_y")};
  c.gesture.arc_amplitude = s.real("arc_amplitude");
  c.gesture.walk_speed = s.real("walk_speed");
  c.seed = s.seed("seed");
  if (c.gesture.noise_sigma < 0.0) throw ContractError("invalid value for 'noise_sigma': must be >= 0");
  c.validate();
  return c;
}

int cmd_synth(const Settings& s) {
  const auto cfg = synth_config(s);
  const auto out = s.required_path("out");
  const auto n = s.count("n_per_class");
  const auto kind = s.text("dataset");
  Dataset ds;
  if (kind == "gesture") {
    ds = synth::generate_dataset(cfg, n, cfg.seed);
  } else if (kind == "order_probe") {
    ds = synth::generate_order_probe_dataset(cfg, n, cfg.seed);
  } else {
    throw ContractError("invalid value for 'dataset': '" + kind + "' (expected gesture or order_probe)");
  }
  save_dataset(out, ds);
  const auto counts = ds.class_counts();
  for (std::size_t k = 0; k < ds.classes.size(); ++k) std::cout << ds.classes[k] << ": " << counts[k] << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train

std::vector<KeySpec> train_keys() {
  return {
      {"data", KeyType::text, nullptr, "dataset directory"},
      {"model_out", KeyType::text, nullptr, "output .kmodel path"},
      {"metrics", KeyType::text, nullptr, "metrics CSV path (default: metrics.csv next to the model)"},
      {"sweep", KeyType::text, nullptr, "grid JSON file, or 'default' for the built-in 5-run grid"},
      {"parallel", KeyType::flag, false, "run sweep grid points concurrently"},
      {"seed", KeyType::integer, 42, "training seed"},
      {"epochs", KeyType::integer, 40, "training epochs"},
      {"batch_size", KeyType::integer, 16, "minibatch size"},
      {"learning_rate", KeyType::real, 1e-3, "Adam learning rate"},
      {"beta1", KeyType::real, 0.9, "Adam beta1"},
      {"beta2", KeyType::real, 0.999, "Adam beta2"},
      {"adam_epsilon", KeyType::real, 1e-8, "Adam epsilon"},
      {"arch", KeyType::text, "lstm", "lstm | mlp"},
      {"recurrent_units", KeyType::uint_list, nullptr, "LSTM widths, e.g. 64,32"},
      {"hidden_units", KeyType::uint_list, nullptr, "dense hidden widths"},
      {"hidden_activation", KeyType::text, "relu", "relu | tanh"},
      {"pool", KeyType::text, "mean", "MLP pooling: mean | flatten"},
      {"train_fraction", KeyType::real, 0.7, "training share of each class"},
      {"early_stop_patience", KeyType::integer, nullptr, "epochs without test improvement before stopping"},
      {"precision", KeyType::text, "f64", "f64 | f32"},
      {"raw_inputs", KeyType::flag, false, "do not subtract the training-set feature mean"},
  };
}

TrainConfig train_config(const Settings& s) {
  TrainConfig c;
  if (s.integer("epochs") < 1) throw ContractError("invalid value for 'epochs': must be >= 1");
  if (s.integer("batch_size") < 1) throw ContractError("invalid value for 'batch_size': must be >= 1");
  c.epochs = s.count("epochs");
  c.batch_size = s.count("batch_size");
  c.seed = s.seed("seed");
  c.learning_rate = s.real("learning_rate");
  c.beta1 = s.real("beta1");
  c.beta2 = s.real("beta2");
  c.epsilon = s.real("adam_epsilon");
  c.arch.kind = neural::model_kind_from_string(s.text("arch"));
  if (s.has("recurrent_units")) c.arch.recurrent_units = s.list("recurrent_units");
  if (s.has("hidden_units")) c.arch.hidden_units = s.list("hidden_units");
  c.arch.hidden_activation = neural::activation_from_string(s.text("hidden_activation"));
  c.arch.pool = neural::pool_kind_from_string(s.text("pool"));
  c.train_fraction = s.real("train_fraction");
  if (s.has("early_stop_patience")) {
    if (s.integer("early_stop_patience") < 1) throw ContractError("invalid value for 'early_stop_patience': must be >= 1");
    c.early_stop_patience = s.count("early_stop_patience");
  }
  c.center_inputs = !s.flag("raw_inputs");
  c.validate();
  return c;
}

std::vector<ConfigOverride> load_grid(const std::string& path) {
  if (path == "default") return default_sweep_grid();
  json j;
  try {
    j = json::parse(detail::read_file(path));
  } catch (const json::exception& e) {
    throw ParseError(0, path + ": " + e.what());
  }
  if (!j.is_array() || j.empty()) throw ContractError(path + ": sweep grid must be a non-empty JSON array");
  std::vector<ConfigOverride> grid;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    if (!e.is_object()) throw ContractError(path + ": grid entries must be objects");
    ConfigOverride o;
    o.name = "run" + std::to_string(i);
    for (const auto& [key, v] : e.items()) {
      try {
        if (key == "name") o.name = v.get<std::string>();
        else if (key == "arch") o.kind = neural::model_kind_from_string(v.get<std::string>());
        else if (key == "hidden_activation") o.hidden_activation = neural::activation_from_string(v.get<std::string>());
        else if (key == "train_fraction") o.train_fraction = v.get<double>();
        else if (key == "epochs") o.epochs = v.get<std::size_t>();
        else if (key == "batch_size") o.batch_size = v.get<std::size_t>();
        else if (key == "learning_rate") o.learning_rate = v.get<double>();
        else if (key == "seed") o.seed = v.get<std::uint64_t>();
        else throw ContractError(path + ": unknown grid key '" + key + "'");
      } catch (const json::exception&) {
        throw ContractError(path + ": invalid value for grid key '" + key + "'");
      }
    }
    grid.push_back(std::move(o));
  }
  return grid;
}

json config_json(const TrainConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["arch"] = neural::to_string(c.arch.kind);
  j["hidden_activation"] = neural::to_string(c.arch.hidden_activation);
  j["train_fraction"] = c.train_fraction;
  return j;
}

template <class T>
int run_train(const Settings& s, const TrainConfig& cfg, const Dataset& ds) {
  if (s.has("sweep")) {
    const auto grid = load_grid(s.text("sweep"));
    for (std::size_t i = 0; i < grid.size(); ++i) apply_override(cfg, grid[i], i).validate();
    const auto results = sweep<T>(ds, cfg, grid, s.flag("parallel"));
    auto out = nlohmann::ordered_json::array();
    for (const auto& r : results) {
      nlohmann::ordered_json e;
      e["name"] = r.name;
      e["config"] = config_json(r.config);
      e["epochs_run"] = r.history.records.size();
      e["report"] = to_json(r.report);
      out.push_back(e);
    }
    std::cout << out.dump(2) << "\n";
    return kExitOk;
  }
  const fs::path model_out = s.required_path("model_out");
  const fs::path metrics = s.has("metrics") ? fs::path(s.text("metrics")) : model_out.parent_path() / "metrics.csv";
  for (const auto& p : {model_out, metrics}) {
    const auto dir = p.parent_path();
    if (!dir.empty() && !fs::is_directory(dir)) throw IoError("output directory '" + dir.string() + "' does not exist");
  }
  auto result = train<T>(ds, cfg);
  save_model(result.model, model_out);
  detail::write_file(metrics, result.history.to_csv());
  std::cout << "epochs run: " << result.history.records.size() << "\n";
  std::cout << "final test accuracy: " << result.test_report.accuracy << "\n";
  return kExitOk;
}

int cmd_train(const Settings& s) {
  const auto cfg = train_config(s);
  const auto precision = precision_from_string(s.text("precision"));
  const auto data = s.required_path("data");
  if (!s.has("sweep")) s.required_path("model_out");
  const auto ds = load_dataset(data);
  return precision == Precision::f64 ? run_train<double>(s, cfg, ds) : run_train<float>(s, cfg, ds);
}

// ---------------------------------------------------------------- eval

std::vector<KeySpec> eval_keys() {
  return {
      {"model", KeyType::text, nullptr, ".kmodel path"},
      {"data", KeyType::text, nullptr, "dataset directory"},
      {"split", KeyType::text, "all", "all | train | test (recomputed from the model's training seed)"},
      {"format", KeyType::text, "json", "json | csv"},
  };
}

template <class T>
int run_eval(const Settings& s, const std::string& bytes) {
  const auto model = deserialize_model<T>(bytes);
  Dataset ds = load_dataset(s.required_path("data"));
  const auto split = s.text("split");
  if (split == "train" || split == "test") {
    auto parts = split_dataset(ds, model.train_fraction, model.seed);
    ds = split == "train" ? std::move(parts.first) : std::move(parts.second);
  } else if (split != "all") {
    throw ContractError("invalid value for 'split': '" + split + "'");
  }
  const auto report = evaluate(model, ds);
  if (s.text("format") == "csv") {
    std::cout << confusion_csv(report.confusion);
  } else {
    std::cout << to_json(report).dump(2) << "\n";
  }
  return kExitOk;
}

int cmd_eval(const Settings& s) {
  const auto format = s.text("format");
  if (format != "json" && format != "csv") throw ContractError("invalid value for 'format': '" + format + "'");
  const auto bytes = detail::read_file(s.required_path("model"));
  return model_precision(bytes) == Precision::f64 ? run_eval<double>(s, bytes) : run_eval<float>(s, bytes);
}

// ---------------------------------------------------------------- predict

std::vector<KeySpec> predict_keys() {
  return {
      {"model", KeyType::text, nullptr, ".kmodel path"},
      {"input", KeyType::text, nullptr, ".kseq file, or '-' (default) for frame lines on stdin"},
      {"threshold", KeyType::real, 0.5, "minimum smoothed confidence in [0,1]"},
      {"smoothing_k", KeyType::integer, 10, "number of window outputs averaged"},
      {"changes_only", KeyType::flag, false, "only print label transitions"},
  };
}

template <class T>
int run_predict(const Settings& s, const std::string& bytes, const StreamSettings& settings) {
  StreamPredictor<T> predictor(deserialize_model<T>(bytes), settings);
  const bool changes_only = s.flag("changes_only");
  std::optional<std::string> last_label;
  auto emit = [&](const std::optional<PredictionEvent>& e) {
    if (!e) return;
    if (changes_only && last_label && *last_label == e->label) return;
    last_label = e->label;
    std::cout << to_json_line(*e) << "\n";
  };

  const auto input = s.has("input") ? s.text("input") : std::string("-");
  if (input != "-") {
    const auto seq = load_sequence(input);
    for (const auto& f : seq.frames) emit(predictor.push_frame(f));
    return kExitOk;
  }

  // stdin: optional .kseq header line, then one frame per line.
  std::string line;
  std::size_t line_no = 0;
  std::optional<double> last_ts;
  while (std::getline(std::cin, line)) {
    ++line_no;
    const auto trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    if (trimmed.front() == '{') {
      if (line_no != 1) throw ParseError(line_no, "header is only allowed on the first line");
      const auto header = detail::parse_sequence_header(trimmed, line_no);
      if (header.layout.total_dim() != predictor.model().net.arch.input_dim) {
        throw ShapeError("stream layout has " + std::to_string(header.layout.total_dim()) + " values, model expects " +
                         std::to_string(predictor.model().net.arch.input_dim));
      }
      continue;
    }
    const auto values = detail::parse_number_array<double>(trimmed, line_no);
    if (values.empty()) throw ParseError(line_no, "frame line has no timestamp");
    FrameVector f{values[0], std::vector<double>(values.begin() + 1, values.end())};
    if (f.timestamp_s < 0.0 || (last_ts && !(f.timestamp_s > *last_ts))) {
      throw ParseError(line_no, "timestamps must be non-negative and strictly increasing");
    }
    last_ts = f.timestamp_s;
    emit(predictor.push_frame(f));
    std::cout.flush();
  }
  return kExitOk;
}

int cmd_predict(const Settings& s) {
  StreamSettings settings;
  const double threshold = s.real("threshold");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ContractError("invalid value for 'threshold': must lie in [0, 1]");
  if (s.integer("smoothing_k") < 1) throw ContractError("invalid value for 'smoothing_k': must be >= 1");
  settings.confidence_threshold = threshold;
  settings.smoothing_k = s.count("smoothing_k");
  const auto bytes = detail::read_file(s.required_path("model"));
  return model_precision(bytes) == Precision::f64 ? run_predict<double>(s, bytes, settings)
                                                  : run_predict<float>(s, bytes, settings);
}

// ---------------------------------------------------------------- gradcheck

std::vector<KeySpec> gradcheck_keys() {
  return {
      {"arch", KeyType::text, "lstm", "lstm | mlp"},
      {"seed", KeyType::integer, 42, "parameter and input seed"},
      {"epsilon", KeyType::real, 1e-5, "central-difference step"},
      {"tolerance", KeyType::real, 1e-4, "maximum relative error"},
  };
}

int cmd_gradcheck(const Settings& s) {
  constexpr std::size_t kDim = 8, kSteps = 5, kHidden = 16;
  const auto kind = neural::model_kind_from_string(s.text("arch"));
  auto arch = kind == neural::ModelKind::lstm_classifier ? neural::ArchConfig::lstm_default(kDim, kSteps, 2)
                                                         : neural::ArchConfig::mlp_default(kDim, kSteps, 2);
  if (kind == neural::ModelKind::lstm_classifier) {
    arch.recurrent_units = {kHidden};
    arch.hidden_units = {kHidden / 2};
  } else {
    arch.hidden_units = {kHidden, kHidden / 2};
  }
  const auto seed = s.seed("seed");
  const auto model = neural::init_params<double>(arch, seed);
  SplitMix64 rng(derive_seed(seed, 1));
  std::vector<double> input(kDim * kSteps);
  for (auto& v : input) v = rng.gaussian();
  const std::size_t label = rng.below(2);

  const auto report = neural::gradient_check(model, neural::view_of(input, kSteps), label, s.real("epsilon"), s.real("tolerance"));
  std::printf("arch=%s D=%zu H=%zu T=%zu coordinates=%zu\n", neural::to_string(kind).c_str(), kDim, kHidden, kSteps,
              report.coordinates);
  std::printf("max_rel_error=%.6e tolerance=%.1e worst=%s[%zu] analytic=%.9e numeric=%.9e\n", report.max_rel_error,
              s.real("tolerance"), report.worst_parameter.c_str(), report.worst_index, report.worst_analytic,
              report.worst_numeric);
  std::printf("%s\n", report.passed ? "PASS" : "FAIL");
  return report.passed ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keypoint-sequence action recognition: synthesize, train, evaluate, predict."};
  app.require_subcommand(1);

  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset");
  Settings synth_settings(synth_cmd, synth_keys());
  std::string synth_out;
  synth_cmd->add_option("out_dir", synth_out, "output directory");

  auto* train_cmd = app.add_subcommand("train", "train a model (or run a sweep)");
  Settings train_settings(train_cmd, train_keys());
  std::string train_data, train_model;
  train_cmd->add_option("data_dir", train_data, "dataset directory");
  train_cmd->add_option("model_out_path", train_model, "output model path");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a model on a dataset");
  Settings eval_settings(eval_cmd, eval_keys());
  std::string eval_model, eval_data;
  eval_cmd->add_option("model_path", eval_model, "model path");
  eval_cmd->add_option("data_dir", eval_data, "dataset directory");

  auto* predict_cmd = app.add_subcommand("predict", "stream predictions over a frame sequence");
  Settings predict_settings(predict_cmd, predict_keys());
  std::string predict_model, predict_input;
  predict_cmd->add_option("model_path", predict_model, "model path");
  predict_cmd->add_option("source", predict_input, ".kseq file or '-'");

  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of backpropagation");
  Settings grad_settings(grad_cmd, gradcheck_keys());

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (synth_cmd->parsed()) {
      synth_settings.resolve();
      if (!synth_out.empty()) synth_settings.set_if_missing("out", synth_out);
      return cmd_synth(synth_settings);
    }
    if (train_cmd->parsed()) {
      train_settings.resolve();
      if (!train_data.empty()) train_settings.set_if_missing("data", train_data);
      if (!train_model.empty()) train_settings.set_if_missing("model_out", train_model);
      return cmd_train(train_settings);
    }
    if (eval_cmd->parsed()) {
      eval_settings.resolve();
      if (!eval_model.empty()) eval_settings.set_if_missing("model", eval_model);
      if (!eval_data.empty()) eval_settings.set_if_missing("data", eval_data);
      return cmd_eval(eval_settings);
    }
    if (predict_cmd->parsed()) {
      predict_settings.resolve();
      if (!predict_model.empty()) predict_settings.set_if_missing("model", predict_model);
      if (!predict_input.empty()) predict_settings.set_if_missing("input", predict_input);
      return cmd_predict(predict_settings);
    }
    if (grad_cmd->parsed()) {
      grad_settings.resolve();
      return cmd_gradcheck(grad_settings);
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
