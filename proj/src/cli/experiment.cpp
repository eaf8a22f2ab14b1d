#include "deffx/cli/experiment.hpp"

#include <cstdlib>
#include <fstream>

#include "deffx/core/config_reader.hpp"
#include "deffx/model/model.hpp"

namespace deffx::cli {

namespace {

DataConfig parse_data(const nlohmann::json& doc, const std::filesystem::path& base) {
  ConfigReader r(doc, "/data");
  DataConfig d;
  d.manifest = r.string("manifest");
  if (d.manifest.is_relative()) d.manifest = base / d.manifest;
  d.segments.length = r.count("segment_length", d.segments.length, 1);
  d.segments.hop = r.count("hop", 0, 0);
  d.segments.seed = r.uint64("seed", 0);
  if (r.has("split")) {
    ConfigReader s(r.object("split"), r.path("split"));
    d.segments.split.train = s.number("train", d.segments.split.train);
    d.segments.split.val = s.number("val", d.segments.split.val);
    d.segments.split.test = s.number("test", d.segments.split.test);
    s.finish();
    try {
      d.segments.split.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(r.path("split"), e.what());
    }
  }
  r.finish();
  return d;
}

AnalysisConfig parse_analysis(const nlohmann::json& doc, double fs, std::size_t num_controls) {
  ConfigReader r(doc, "/analysis");
  AnalysisConfig a;
  a.sweep.fs = fs;
  a.sweep.f1 = r.number("f1", a.sweep.f1);
  a.sweep.f2 = r.number("f2", a.sweep.f2);
  a.sweep.steps = r.count("steps", a.sweep.steps, 2);
  a.sweep.duration = r.number("duration", a.sweep.duration);
  a.sweep.amplitude = r.number("amplitude", a.sweep.amplitude);
  a.sweep.warmup = r.number("warmup", a.sweep.warmup);
  try {
    a.sweep.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError("/analysis", e.what());
  }
  if (r.has("controls")) {
    const auto& settings = r.array("controls");
    for (std::size_t i = 0; i < settings.size(); ++i) {
      const std::string where = r.path("controls") + "/" + std::to_string(i);
      if (!settings[i].is_array()) throw ConfigError(where, "expected an array of control values");
      if (settings[i].size() != num_controls)
        throw ConfigError(where, "has " + std::to_string(settings[i].size()) + " values, model takes " +
                                     std::to_string(num_controls));
      std::vector<double> c;
      for (const auto& v : settings[i]) {
        if (!v.is_number() || v.get<double>() < 0.0 || v.get<double>() > 1.0)
          throw ConfigError(where, "control values must be numbers in [0, 1]");
        c.push_back(v.get<double>());
      }
      a.controls.push_back(std::move(c));
    }
  }
  a.amplitude_points = r.count("amplitude_points", a.amplitude_points, 2);
  a.trace_seconds = r.number("trace_seconds", a.trace_seconds);
  a.trace_frequency = r.number("trace_frequency", a.trace_frequency);
  a.trace_amplitude = r.number("trace_amplitude", a.trace_amplitude);
  if (!(a.trace_seconds > 0.0)) throw ConfigError(r.path("trace_seconds"), "must be positive");
  if (!(a.trace_frequency > 0.0 && a.trace_frequency < fs / 2)) throw ConfigError(r.path("trace_frequency"), "must lie in (0, fs/2)");
  r.finish();
  return a;
}

void check_data_against_model(const DataConfig& d, const ExperimentConfig& cfg) {
  data::Manifest m;
  try {
    m = data::load_manifest(d.manifest);
  } catch (const ConfigError& e) {
    throw ConfigError("/data/manifest" + e.pointer(), "in " + d.manifest.string() + ": " + e.what());
  }
  if (m.num_controls() != cfg.model.num_controls)
    throw ConfigError("/model/num_controls", "model takes " + std::to_string(cfg.model.num_controls) +
                                                 " controls but manifest entries have " +
                                                 std::to_string(m.num_controls()));
  if (m.sample_rate != cfg.model.sample_rate)
    throw ConfigError("/model/sample_rate", "model sample rate " + std::to_string(cfg.model.sample_rate) +
                                                " differs from manifest sample rate " + std::to_string(m.sample_rate));
  std::size_t shortest = SIZE_MAX;
  for (const auto& e : m.entries)
    for (const auto& p : {e.input, e.target}) shortest = std::min(shortest, data::read_wav_info(p).frames);
  const std::size_t len = d.segments.length;
  if (len > shortest)
    throw ConfigError("/data/segment_length", std::to_string(len) + " exceeds the shortest file (" +
                                                  std::to_string(shortest) + " samples)");
  if (cfg.train.weights.mrstft > 0.0 && len < cfg.train.mrstft.min_length())
    throw ConfigError("/data/segment_length", "MR-STFT needs segments of at least " +
                                                  std::to_string(cfg.train.mrstft.min_length()) + " samples");
  if (cfg.train.tbptt.enabled) {
    if (cfg.train.tbptt.chunk_len + cfg.train.tbptt.warmup_len > len)
      throw ConfigError("/train/tbptt/chunk_len", "chunk_len plus warmup_len exceeds segment_length");
    if (cfg.train.weights.mrstft > 0.0 && cfg.train.tbptt.chunk_len < cfg.train.mrstft.min_length())
      throw ConfigError("/train/tbptt/chunk_len", "MR-STFT needs chunks of at least " +
                                                      std::to_string(cfg.train.mrstft.min_length()) + " samples");
  }
}

bool model_is_recurrent(const model::ModelSpec& spec) {
  return model::build_model<float>(spec)->recurrent();
}

}  // namespace

std::optional<Precision> parse_precision(const std::string& s) {
  if (s == "f32") return Precision::kF32;
  if (s == "f64") return Precision::kF64;
  return std::nullopt;
}

ExperimentConfig parse_experiment(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                                  const Overrides& overrides, const std::filesystem::path& output_root) {
  ConfigReader r(doc, "");
  ExperimentConfig cfg;
  cfg.name = r.string("name", cfg.name);
  if (cfg.name.empty() || cfg.name.find_first_of("/\\,") != std::string::npos)
    throw ConfigError("/name", "must be a nonempty name without '/', '\\' or ','");
  cfg.model = model::parse_model_spec(r.object("model"), "/model");
  if (r.has("train")) cfg.train = train::parse_train_config(r.object("train"), "/train");
  if (overrides.seed) {
    cfg.model.seed = *overrides.seed;
    cfg.train.seed = *overrides.seed;
  }
  try {
    model::build_model<float>(cfg.model);
  } catch (const InvalidArgument& e) {
    throw ConfigError("/model", e.what());
  }
  if (cfg.train.tbptt.enabled && !model_is_recurrent(cfg.model))
    throw ConfigError("/train/tbptt/enabled", "truncated BPTT needs a model with recurrent state");
  if (r.has("data")) {
    cfg.data = parse_data(r.object("data"), base_dir);
    check_data_against_model(*cfg.data, cfg);
  }
  cfg.analysis = parse_analysis(r.has("analysis") ? r.object("analysis") : nlohmann::json::object(),
                                cfg.model.sample_rate, cfg.model.num_controls);
  const std::string precision = r.string("precision", "f32");
  if (!parse_precision(precision)) throw ConfigError("/precision", "expected \"f32\" or \"f64\"");
  cfg.precision = overrides.precision.value_or(*parse_precision(precision));
  std::filesystem::path out = overrides.output_dir.value_or(std::filesystem::path(r.string("output_dir", "runs/" + cfg.name)));
  if (out.is_relative() && !overrides.output_dir) out = output_root / out;
  cfg.output_dir = std::filesystem::absolute(out).lexically_normal();
  r.finish();
  return cfg;
}

ExperimentConfig load_experiment(const std::filesystem::path& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", path.string() + " is not valid JSON: " + e.what());
  }
  const char* root = std::getenv("DEFFX_OUTPUT_ROOT");
  const std::filesystem::path output_root =
      root && *root ? std::filesystem::path(root) : std::filesystem::current_path();
  return parse_experiment(doc, std::filesystem::absolute(path).parent_path(), overrides, output_root);
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json doc = {{"name", cfg.name},
                        {"model", model::to_json(cfg.model)},
                        {"train", train::to_json(cfg.train)},
                        {"output_dir", cfg.output_dir.string()},
                        {"precision", cfg.precision == Precision::kF32 ? "f32" : "f64"}};
  if (cfg.data) {
    const auto& s = cfg.data->segments;
    doc["data"] = {{"manifest", cfg.data->manifest.string()},
                   {"segment_length", s.length},
                   {"hop", s.hop},
                   {"seed", s.seed},
                   {"split", {{"train", s.split.train}, {"val", s.split.val}, {"test", s.split.test}}}};
  }
  const auto& a = cfg.analysis;
  doc["analysis"] = {{"f1", a.sweep.f1},           {"f2", a.sweep.upper()},
                     {"steps", a.sweep.steps},     {"duration", a.sweep.duration},
                     {"amplitude", a.sweep.amplitude}, {"warmup", a.sweep.warmup},
                     {"controls", a.controls},     {"amplitude_points", a.amplitude_points},
                     {"trace_seconds", a.trace_seconds}, {"trace_frequency", a.trace_frequency},
                     {"trace_amplitude", a.trace_amplitude}};
  return doc;
}

std::vector<std::vector<double>> analysis_settings(const ExperimentConfig& cfg) {
  if (!cfg.analysis.controls.empty()) return cfg.analysis.controls;
  return {std::vector<double>(cfg.model.num_controls, 0.5)};
}

}  // namespace deffx::cli
