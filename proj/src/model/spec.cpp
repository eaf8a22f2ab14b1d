#include "deffx/model/spec.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "deffx/core/config_reader.hpp"

namespace deffx::model {

namespace {

constexpr std::array<std::pair<std::string_view, std::string_view>, 14> kProcessorTags = {{
    {"PI", "phase_inversion"},
    {"G", "gain"},
    {"O", "dc_offset"},
    {"LP", "lowpass"},
    {"HP", "highpass"},
    {"LS", "lowshelf"},
    {"HS", "highshelf"},
    {"PK", "peak"},
    {"PEQ", "parametric_eq"},
    {"SEQ", "shelving_eq"},
    {"FIR", "static_fir"},
    {"TANH", "tanh"},
    {"MLP", "static_mlp"},
    {"RNL", "static_rational"},
}};

constexpr std::array<std::pair<std::string_view, control::ControllerKind>, 4> kControllerTags = {{
    {"s", control::ControllerKind::kStatic},
    {"sc", control::ControllerKind::kStaticCond},
    {"d", control::ControllerKind::kDynamic},
    {"dc", control::ControllerKind::kDynamicCond},
}};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\n");
  return std::string(s.substr(b, e - b + 1));
}

cond::CondKind read_cond(ConfigReader& r, const std::string& key, std::initializer_list<cond::CondKind> allowed) {
  const std::string name = r.string(key, "none");
  const auto kind = cond::parse_cond_kind(name);
  if (!kind || std::find(allowed.begin(), allowed.end(), *kind) == allowed.end()) {
    std::string opts;
    for (auto k : allowed) opts += (opts.empty() ? "" : ", ") + std::string(cond::cond_kind_name(k));
    throw ConfigError(r.path(key), "unsupported conditioning '" + name + "' (expected one of: " + opts + ")");
  }
  return *kind;
}

dsp::ParamRange read_range(const nlohmann::json& j, const std::string& pointer) {
  ConfigReader r(j, pointer);
  dsp::ParamRange range;
  range.min = r.number("min");
  range.max = r.number("max");
  const std::string scale = r.string("scale", "linear");
  if (scale == "linear") {
    range.scale = dsp::RangeScale::kLinear;
  } else if (scale == "log") {
    range.scale = dsp::RangeScale::kLog;
  } else {
    throw ConfigError(r.path("scale"), "expected 'linear' or 'log'");
  }
  r.finish();
  try {
    dsp::validate(range);
  } catch (const InvalidArgument& e) {
    throw ConfigError(pointer, e.what());
  }
  return range;
}

StageSpec read_stage(const nlohmann::json& j, const std::string& pointer, double fs) {
  ConfigReader r(j, pointer);
  StageSpec s;
  s.processor.kind = r.string("processor");
  const auto kinds = dsp::processor_kinds();
  if (std::find(kinds.begin(), kinds.end(), s.processor.kind) == kinds.end()) {
    throw ConfigError(r.path("processor"), "unknown processor '" + s.processor.kind + "'");
  }
  const std::string ctl = r.string("controller", "dummy");
  const auto kind = control::parse_controller_kind(ctl);
  if (!kind) throw ConfigError(r.path("controller"), "unknown controller '" + ctl + "'");
  s.controller.kind = *kind;
  s.controller.mlp_hidden = r.count("mlp_hidden", s.controller.mlp_hidden, 1);
  s.controller.mlp_layers = r.count("mlp_layers", s.controller.mlp_layers, 1);
  s.controller.lstm_layers = r.count("lstm_layers", s.controller.lstm_layers, 1);
  s.processor.fir_taps = r.count("fir_taps", s.processor.fir_taps, 1);
  s.processor.siren_hidden = r.count("siren_hidden", s.processor.siren_hidden, 1);
  s.processor.siren_layers = r.count("siren_layers", s.processor.siren_layers, 1);
  s.processor.tanh_init = r.boolean("tanh_init", s.processor.tanh_init);
  if (r.has("ranges")) {
    const auto& ranges = r.object("ranges");
    Rng rng(0);
    const auto proc = dsp::make_processor<double>(s.processor, fs, rng, "probe");
    for (const auto& [name, value] : ranges.items()) {
      const auto& specs = proc->params();
      if (std::none_of(specs.begin(), specs.end(), [&](const dsp::ParamSpec& p) { return p.name == name; })) {
        throw ConfigError(r.path("ranges") + "/" + name, "processor '" + s.processor.kind + "' has no such parameter");
      }
      s.processor.ranges[name] = read_range(value, r.path("ranges") + "/" + name);
    }
  }
  r.finish();
  return s;
}

}  // namespace

std::string_view arch_name(Arch arch) {
  switch (arch) {
    case Arch::kLstm: return "lstm";
    case Arch::kTcn: return "tcn";
    case Arch::kGcn: return "gcn";
    case Arch::kGrayBox: return "graybox";
  }
  return "unknown";
}

std::vector<StageSpec> parse_chain(std::string_view chain) {
  std::vector<StageSpec> stages;
  std::size_t pos = 0;
  while (pos <= chain.size()) {
    const std::size_t next = chain.find('>', pos);
    const std::string item = trim(chain.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (item.empty()) throw InvalidArgument("empty stage in chain '" + std::string(chain) + "'");
    const std::size_t dot = item.find('.');
    std::string tag = item.substr(0, dot);
    std::transform(tag.begin(), tag.end(), tag.begin(), [](unsigned char ch) { return std::toupper(ch); });
    StageSpec s;
    const auto p = std::find_if(kProcessorTags.begin(), kProcessorTags.end(), [&](const auto& e) { return e.first == tag; });
    if (p == kProcessorTags.end()) throw InvalidArgument("unknown processor tag '" + tag + "'");
    s.processor.kind = std::string(p->second);
    if (dot != std::string::npos) {
      const std::string suffix = item.substr(dot + 1);
      const auto c = std::find_if(kControllerTags.begin(), kControllerTags.end(),
                                  [&](const auto& e) { return e.first == suffix; });
      if (c == kControllerTags.end()) throw InvalidArgument("unknown controller suffix '." + suffix + "'");
      s.controller.kind = c->second;
    }
    stages.push_back(s);
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return stages;
}

std::string chain_string(const std::vector<StageSpec>& stages) {
  std::string out;
  for (const auto& s : stages) {
    if (!out.empty()) out += " > ";
    const auto p = std::find_if(kProcessorTags.begin(), kProcessorTags.end(),
                                [&](const auto& e) { return e.second == s.processor.kind; });
    out += p == kProcessorTags.end() ? s.processor.kind : std::string(p->first);
    for (const auto& [suffix, kind] : kControllerTags)
      if (kind == s.controller.kind) out += "." + std::string(suffix);
  }
  return out;
}

ModelSpec parse_model_spec(const nlohmann::json& doc, const std::string& pointer) {
  ConfigReader r(doc, pointer);
  ModelSpec spec;
  spec.name = r.string("name", spec.name);
  const std::string type = r.string("type");
  if (type == "lstm") {
    spec.arch = Arch::kLstm;
  } else if (type == "tcn") {
    spec.arch = Arch::kTcn;
  } else if (type == "gcn") {
    spec.arch = Arch::kGcn;
  } else if (type == "graybox") {
    spec.arch = Arch::kGrayBox;
  } else {
    throw ConfigError(r.path("type"), "expected one of lstm, tcn, gcn, graybox");
  }
  spec.sample_rate = r.number("sample_rate", spec.sample_rate);
  if (spec.sample_rate <= 0) throw ConfigError(r.path("sample_rate"), "must be positive");
  spec.num_controls = r.count("num_controls", 0);
  spec.seed = r.uint64("seed", 0);

  using cond::CondKind;
  switch (spec.arch) {
    case Arch::kTcn:
    case Arch::kGcn: {
      ConvConfig& c = spec.conv;
      c.blocks = r.count("blocks", c.blocks, 1);
      c.kernel = r.count("kernel", c.kernel, 1);
      c.dilation_growth = r.count("dilation_growth", c.dilation_growth, 1);
      c.channels = r.count("channels", c.channels, 1);
      c.cond = read_cond(r, "cond",
                         {CondKind::kNone, CondKind::kConcat, CondKind::kFilm, CondKind::kTFilm, CondKind::kTTFilm,
                          CondKind::kTVFilm});
      c.batchnorm = r.boolean("batchnorm", c.batchnorm);
      c.block_size = r.count("block_size", c.block_size, 1);
      c.film_hidden = r.count("film_hidden", c.film_hidden, 1);
      c.film_latent = r.count("film_latent", c.film_latent, 1);
      c.tt_rank = r.count("tt_rank", c.tt_rank, 1);
      c.tt_hidden = r.count("tt_hidden", c.tt_hidden, 1);
      c.tv_latent = r.count("tv_latent", c.tv_latent, 1);
      if ((c.cond == CondKind::kFilm || c.cond == CondKind::kConcat) && spec.num_controls == 0) {
        throw ConfigError(r.path("cond"), "conditioning needs num_controls >= 1");
      }
      if (c.cond == CondKind::kTTFilm && c.tt_rank >= c.channels) {
        throw ConfigError(r.path("tt_rank"), "must be smaller than channels");
      }
      break;
    }
    case Arch::kLstm: {
      LstmConfig& l = spec.lstm;
      l.hidden = r.count("hidden", l.hidden, 1);
      l.cond = read_cond(r, "cond", {CondKind::kNone, CondKind::kConcat, CondKind::kTVCond});
      l.block_size = r.count("block_size", l.block_size, 1);
      l.tv_latent = r.count("tv_latent", l.tv_latent, 1);
      if (l.cond == CondKind::kConcat && spec.num_controls == 0) {
        throw ConfigError(r.path("cond"), "concat conditioning needs num_controls >= 1");
      }
      break;
    }
    case Arch::kGrayBox: {
      GrayBoxSpec& g = spec.graybox;
      g.block_size = r.count("block_size", g.block_size, 1);
      if (r.has("chain") == r.has("stages")) {
        throw ConfigError(pointer + "/stages", "give exactly one of 'chain' or 'stages'");
      }
      if (r.has("chain")) {
        try {
          g.stages = parse_chain(r.string("chain"));
        } catch (const InvalidArgument& e) {
          throw ConfigError(r.path("chain"), e.what());
        }
      } else {
        const auto& arr = r.array("stages");
        for (std::size_t i = 0; i < arr.size(); ++i) {
          g.stages.push_back(read_stage(arr[i], r.path("stages") + "/" + std::to_string(i), spec.sample_rate));
        }
      }
      if (g.stages.empty()) throw ConfigError(r.path("stages"), "chain has no stages");
      for (std::size_t i = 0; i < g.stages.size(); ++i) {
        g.stages[i].controller.block_size = g.block_size;
        const auto k = g.stages[i].controller.kind;
        const bool conditional = k == control::ControllerKind::kStaticCond || k == control::ControllerKind::kDynamicCond;
        if (conditional && spec.num_controls == 0) {
          throw ConfigError(pointer + "/stages/" + std::to_string(i) + "/controller",
                            "conditional controller needs num_controls >= 1");
        }
      }
      break;
    }
  }
  r.finish();
  return spec;
}

nlohmann::json to_json(const ModelSpec& spec) {
  nlohmann::json j;
  j["name"] = spec.name;
  j["type"] = std::string(arch_name(spec.arch));
  j["sample_rate"] = spec.sample_rate;
  j["num_controls"] = spec.num_controls;
  j["seed"] = spec.seed;
  switch (spec.arch) {
    case Arch::kTcn:
    case Arch::kGcn: {
      const ConvConfig& c = spec.conv;
      j["blocks"] = c.blocks;
      j["kernel"] = c.kernel;
      j["dilation_growth"] = c.dilation_growth;
      j["channels"] = c.channels;
      j["cond"] = std::string(cond::cond_kind_name(c.cond));
      j["batchnorm"] = c.batchnorm;
      j["block_size"] = c.block_size;
      j["film_hidden"] = c.film_hidden;
      j["film_latent"] = c.film_latent;
      j["tt_rank"] = c.tt_rank;
      j["tt_hidden"] = c.tt_hidden;
      j["tv_latent"] = c.tv_latent;
      break;
    }
    case Arch::kLstm:
      j["hidden"] = spec.lstm.hidden;
      j["cond"] = std::string(cond::cond_kind_name(spec.lstm.cond));
      j["block_size"] = spec.lstm.block_size;
      j["tv_latent"] = spec.lstm.tv_latent;
      break;
    case Arch::kGrayBox: {
      j["block_size"] = spec.graybox.block_size;
      auto stages = nlohmann::json::array();
      for (const auto& s : spec.graybox.stages) {
        nlohmann::json st;
        st["processor"] = s.processor.kind;
        st["controller"] = std::string(control::controller_kind_name(s.controller.kind));
        st["mlp_hidden"] = s.controller.mlp_hidden;
        st["mlp_layers"] = s.controller.mlp_layers;
        st["lstm_layers"] = s.controller.lstm_layers;
        st["fir_taps"] = s.processor.fir_taps;
        st["siren_hidden"] = s.processor.siren_hidden;
        st["siren_layers"] = s.processor.siren_layers;
        st["tanh_init"] = s.processor.tanh_init;
        if (!s.processor.ranges.empty()) {
          nlohmann::json ranges = nlohmann::json::object();
          for (const auto& [name, range] : s.processor.ranges) {
            ranges[name] = {{"min", range.min},
                            {"max", range.max},
                            {"scale", range.scale == dsp::RangeScale::kLog ? "log" : "linear"}};
          }
          st["ranges"] = ranges;
        }
        stages.push_back(st);
      }
      j["stages"] = stages;
      break;
    }
  }
  return j;
}

}  // namespace deffx::model
