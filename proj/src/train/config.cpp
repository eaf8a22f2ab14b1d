#include <cmath>

#include "deffx/core/config_reader.hpp"
#include "deffx/train/trainer.hpp"

namespace deffx::train {

void TrainConfig::validate() const {
  if (max_steps < 1) throw InvalidArgument("max_steps must be at least 1");
  if (batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
  if (!(adam.lr > 0.0)) throw InvalidArgument("lr must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw InvalidArgument("Adam betas must lie in [0, 1)");
  if (!(adam.eps > 0.0)) throw InvalidArgument("Adam eps must be positive");
  weights.validate();
  if (weights.mrstft > 0.0) mrstft.validate();
  if (tbptt.enabled && tbptt.chunk_len < 1) throw InvalidArgument("tbptt chunk_len must be at least 1");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw InvalidArgument("lr_decay must lie in (0, 1]");
}

double TrainConfig::lr_scale(std::size_t step) const {
  if (decay_every == 0 || lr_decay == 1.0) return 1.0;
  return std::pow(lr_decay, static_cast<double>(step / decay_every));
}

TrainConfig parse_train_config(const nlohmann::json& doc, const std::string& pointer) {
  ConfigReader r(doc, pointer);
  TrainConfig c;
  c.max_steps = r.count("max_steps", c.max_steps, 1);
  c.batch_size = r.count("batch_size", c.batch_size, 1);
  c.adam.lr = r.number("lr", c.adam.lr);
  if (!(c.adam.lr > 0.0)) throw ConfigError(r.path("lr"), "must be positive");
  if (r.has("betas")) {
    const auto& b = r.array("betas");
    if (b.size() != 2 || !b[0].is_number() || !b[1].is_number())
      throw ConfigError(r.path("betas"), "expected two numbers");
    c.adam.beta1 = b[0].get<double>();
    c.adam.beta2 = b[1].get<double>();
    if (!(c.adam.beta1 >= 0.0 && c.adam.beta1 < 1.0 && c.adam.beta2 >= 0.0 && c.adam.beta2 < 1.0))
      throw ConfigError(r.path("betas"), "betas must lie in [0, 1)");
  }
  c.adam.eps = r.number("eps", c.adam.eps);
  if (!(c.adam.eps > 0.0)) throw ConfigError(r.path("eps"), "must be positive");
  if (r.has("loss")) {
    ConfigReader l(r.object("loss"), r.path("loss"));
    c.weights.l1 = l.number("l1", c.weights.l1);
    c.weights.mrstft = l.number("mrstft", c.weights.mrstft);
    if (!(c.weights.l1 >= 0.0)) throw ConfigError(l.path("l1"), "must be nonnegative");
    if (!(c.weights.mrstft >= 0.0)) throw ConfigError(l.path("mrstft"), "must be nonnegative");
    if (c.weights.l1 == 0.0 && c.weights.mrstft == 0.0) throw ConfigError(l.path("l1"), "both loss weights are zero");
    if (l.has("resolutions")) {
      const auto& res = l.array("resolutions");
      c.mrstft.resolutions.clear();
      for (std::size_t i = 0; i < res.size(); ++i) {
        const std::string where = l.path("resolutions") + "/" + std::to_string(i);
        const auto& t = res[i];
        auto natural = [](const nlohmann::json& v) { return v.is_number_integer() && v.get<long long>() >= 0; };
        if (!t.is_array() || t.size() != 3 || !natural(t[0]) || !natural(t[1]) || !natural(t[2]))
          throw ConfigError(where, "expected [fft_size, hop, window_len]");
        loss::StftResolution s{t[0].get<std::size_t>(), t[1].get<std::size_t>(), t[2].get<std::size_t>()};
        if (!(s.fft_size >= s.window_len && s.window_len > s.hop && s.hop > 0))
          throw ConfigError(where, "needs fft_size >= window_len > hop > 0");
        c.mrstft.resolutions.push_back(s);
      }
      if (c.mrstft.resolutions.empty()) throw ConfigError(l.path("resolutions"), "no resolutions");
    }
    l.finish();
  }
  if (r.has("tbptt")) {
    ConfigReader t(r.object("tbptt"), r.path("tbptt"));
    c.tbptt.enabled = t.boolean("enabled", true);
    c.tbptt.chunk_len = t.count("chunk_len", c.tbptt.chunk_len, 1);
    c.tbptt.warmup_len = t.count("warmup_len", c.tbptt.warmup_len, 0);
    t.finish();
  }
  c.val_every = r.count("val_every", c.val_every, 1);
  c.lr_decay = r.number("lr_decay", c.lr_decay);
  if (!(c.lr_decay > 0.0 && c.lr_decay <= 1.0)) throw ConfigError(r.path("lr_decay"), "must lie in (0, 1]");
  c.decay_every = r.count("decay_every", c.decay_every, 0);
  c.seed = r.uint64("seed", c.seed);
  r.finish();
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json res = nlohmann::json::array();
  for (const auto& s : c.mrstft.resolutions) res.push_back({s.fft_size, s.hop, s.window_len});
  return {{"max_steps", c.max_steps},
          {"batch_size", c.batch_size},
          {"lr", c.adam.lr},
          {"betas", {c.adam.beta1, c.adam.beta2}},
          {"eps", c.adam.eps},
          {"loss", {{"l1", c.weights.l1}, {"mrstft", c.weights.mrstft}, {"resolutions", res}}},
          {"tbptt", {{"enabled", c.tbptt.enabled}, {"chunk_len", c.tbptt.chunk_len}, {"warmup_len", c.tbptt.warmup_len}}},
          {"val_every", c.val_every},
          {"lr_decay", c.lr_decay},
          {"decay_every", c.decay_every},
          {"seed", c.seed}};
}

}  // namespace deffx::train
