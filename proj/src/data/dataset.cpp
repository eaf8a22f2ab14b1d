#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "deffx/core/config_reader.hpp"
#include "deffx/core/error.hpp"
#include "deffx/core/rng.hpp"
#include "deffx/data/dataset.hpp"

namespace deffx::data {

namespace {

std::filesystem::path check_audio_file(ConfigReader& r, const std::string& key, const std::filesystem::path& base,
                                       double sample_rate) {
  std::filesystem::path p = r.string(key);
  if (p.is_relative()) p = base / p;
  if (!std::filesystem::is_regular_file(p)) throw ConfigError(r.path(key), "file not found: " + p.string());
  WavInfo info;
  try {
    info = read_wav_info(p);
  } catch (const IoError& e) {
    throw ConfigError(r.path(key), e.what());
  }
  if (info.sample_rate != sample_rate)
    throw ConfigError(r.path(key), p.string() + " has sample rate " + std::to_string(info.sample_rate) +
                                       ", manifest says " + std::to_string(sample_rate));
  return p;
}

}  // namespace

Manifest parse_manifest(const nlohmann::json& doc, const std::filesystem::path& base_dir, const std::string& pointer) {
  ConfigReader r(doc, pointer);
  Manifest m;
  m.sample_rate = r.number("sample_rate");
  if (!(m.sample_rate > 0.0)) throw ConfigError(r.path("sample_rate"), "must be positive");
  const auto& entries = r.array("entries");
  if (entries.empty()) throw ConfigError(r.path("entries"), "no entries");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    ConfigReader e(entries[i], r.path("entries") + "/" + std::to_string(i));
    ManifestEntry entry;
    entry.input = check_audio_file(e, "input", base_dir, m.sample_rate);
    entry.target = check_audio_file(e, "target", base_dir, m.sample_rate);
    if (e.has("controls")) {
      const auto& c = e.array("controls");
      for (std::size_t k = 0; k < c.size(); ++k) {
        const std::string where = e.path("controls") + "/" + std::to_string(k);
        if (!c[k].is_number()) throw ConfigError(where, "expected a number");
        const double v = c[k].get<double>();
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(where, "control " + std::to_string(v) + " outside [0, 1]");
        entry.controls.push_back(v);
      }
    }
    if (i > 0 && entry.controls.size() != m.entries.front().controls.size())
      throw ConfigError(e.path("controls"), "has " + std::to_string(entry.controls.size()) +
                                                " controls, entry 0 has " +
                                                std::to_string(m.entries.front().controls.size()));
    e.finish();
    m.entries.push_back(std::move(entry));
  }
  r.finish();
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read manifest " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", "manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_manifest(doc, path.parent_path());
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  nlohmann::json doc = {{"sample_rate", manifest.sample_rate}, {"entries", nlohmann::json::array()}};
  for (const auto& e : manifest.entries)
    doc["entries"].push_back({{"input", e.input.string()}, {"target", e.target.string()}, {"controls", e.controls}});
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

void SplitFractions::validate() const {
  if (!(train >= 0.0 && val >= 0.0 && test >= 0.0)) throw InvalidArgument("split fractions must be nonnegative");
  if (std::abs(train + val + test - 1.0) > 1e-9) throw InvalidArgument("split fractions must sum to 1");
}

std::vector<Split> assign_splits(std::size_t entries, const SplitFractions& fractions, std::uint64_t seed) {
  fractions.validate();
  const double f[3] = {fractions.train, fractions.val, fractions.test};
  std::size_t counts[3];
  std::size_t total = 0;
  for (int s = 0; s < 3; ++s) total += counts[s] = static_cast<std::size_t>(std::floor(f[s] * entries));
  // Largest remainder, ties to the earlier split.
  while (total < entries) {
    int best = 0;
    double best_rem = -1.0;
    for (int s = 0; s < 3; ++s) {
      const double rem = f[s] * entries - counts[s];
      if (rem > best_rem) best = s, best_rem = rem;
    }
    ++counts[best];
    ++total;
  }
  const int positive = (f[0] > 0) + (f[1] > 0) + (f[2] > 0);
  if (entries >= static_cast<std::size_t>(positive)) {
    for (int s = 0; s < 3; ++s) {
      if (f[s] > 0 && counts[s] == 0) {
        const int donor = static_cast<int>(std::max_element(counts, counts + 3) - counts);
        --counts[donor];
        ++counts[s];
      }
    }
  }
  std::vector<std::size_t> order(entries);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<Split> out(entries);
  std::size_t k = 0;
  for (int s = 0; s < 3; ++s)
    for (std::size_t i = 0; i < counts[s]; ++i) out[order[k++]] = static_cast<Split>(s);
  return out;
}

std::vector<std::size_t> segment_offsets(std::size_t signal_length, std::size_t length, std::size_t hop) {
  if (length == 0 || hop == 0) throw InvalidArgument("segment length and hop must be positive");
  if (signal_length < length)
    throw InvalidArgument("signal of " + std::to_string(signal_length) + " samples is shorter than the " +
                          std::to_string(length) + "-sample segment length");
  std::vector<std::size_t> out;
  for (std::size_t o = 0; o + length <= signal_length; o += hop) out.push_back(o);
  return out;
}

Splits segment(const Manifest& manifest, const SegmentConfig& cfg) {
  const auto assignment = assign_splits(manifest.entries.size(), cfg.split, cfg.seed);
  Splits out;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    const Audio x = load_wav(e.input);
    const Audio y = load_wav(e.target);
    if (x.samples.size() != y.samples.size())
      throw IoError("entry " + std::to_string(i) + ": input has " + std::to_string(x.samples.size()) +
                    " samples, target has " + std::to_string(y.samples.size()));
    std::vector<std::size_t> offsets;
    try {
      offsets = segment_offsets(x.samples.size(), cfg.length, cfg.effective_hop());
    } catch (const InvalidArgument& err) {
      throw InvalidArgument("entry " + std::to_string(i) + " (" + e.input.string() + "): " + err.what());
    }
    auto& dest = assignment[i] == Split::kTrain ? out.train : assignment[i] == Split::kVal ? out.val : out.test;
    for (std::size_t o : offsets) {
      Segment s;
      s.x.assign(x.samples.begin() + o, x.samples.begin() + o + cfg.length);
      s.y.assign(y.samples.begin() + o, y.samples.begin() + o + cfg.length);
      s.controls = e.controls;
      s.entry = i;
      s.offset = o;
      dest.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace deffx::data
