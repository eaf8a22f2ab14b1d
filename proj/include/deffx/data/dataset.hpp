#pragma once

// WAV ingestion, run manifests, and segmentation into train/val/test sets.

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

namespace deffx::data {

enum class SampleFormat { kPcm16, kPcm24, kFloat32 };

struct WavInfo {
  SampleFormat format = SampleFormat::kFloat32;
  std::size_t channels = 1;
  double sample_rate = 48000.0;
  std::size_t frames = 0;
};

struct Audio {
  std::vector<double> samples;  // [-1, 1]
  double sample_rate = 48000.0;
};

// Mono PCM 16/24-bit or IEEE float 32-bit. Throws IoError for anything else.
// PCM maps v to v / 2^(bits-1); float samples outside [-1, 1] are clamped.
WavInfo read_wav_info(const std::filesystem::path& path);
Audio load_wav(const std::filesystem::path& path);
// PCM writes round(x * 2^(bits-1)) saturated to the integer range.
void save_wav(const std::filesystem::path& path, std::span<const double> samples, double sample_rate,
              SampleFormat format = SampleFormat::kFloat32);

struct ManifestEntry {
  std::filesystem::path input;
  std::filesystem::path target;
  std::vector<double> controls;  // normalized, [0, 1]
};

struct Manifest {
  double sample_rate = 48000.0;
  std::vector<ManifestEntry> entries;

  std::size_t num_controls() const { return entries.empty() ? 0 : entries.front().controls.size(); }
};

// {"sample_rate": 48000, "entries": [{"input": "...", "target": "...",
// "controls": [0.5]}]}. Relative paths resolve against `base_dir`. Every
// referenced file must exist and be a mono WAV at sample_rate. Errors are
// ConfigError with a pointer below `pointer`.
Manifest parse_manifest(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                        const std::string& pointer = "");
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

struct Segment {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> controls;
  std::size_t entry = 0;
  std::size_t offset = 0;
};

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
  void validate() const;
};

enum class Split { kTrain, kVal, kTest };

// Deterministic assignment of `entries` entries to splits. Counts follow the
// fractions by largest remainder; each split with a positive fraction gets at
// least one entry when there are enough entries.
std::vector<Split> assign_splits(std::size_t entries, const SplitFractions& fractions, std::uint64_t seed);

struct SegmentConfig {
  std::size_t length = 48000;
  std::size_t hop = 0;  // 0 means hop = length
  SplitFractions split;
  std::uint64_t seed = 0;

  std::size_t effective_hop() const { return hop == 0 ? length : hop; }
};

// floor((L - length) / hop) + 1 windows starting at 0, hop, ...
std::vector<std::size_t> segment_offsets(std::size_t signal_length, std::size_t length, std::size_t hop);

struct Splits {
  std::vector<Segment> train;
  std::vector<Segment> val;
  std::vector<Segment> test;
};

// Loads every entry and cuts aligned input/target segments; an entry's
// segments all land in the split assigned to that entry.
Splits segment(const Manifest& manifest, const SegmentConfig& cfg);

}  // namespace deffx::data
