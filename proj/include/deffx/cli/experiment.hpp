#pragma once

// One JSON document describes a run: model, data, training and analysis.
// Everything is validated before any computation starts.

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "deffx/analysis/response.hpp"
#include "deffx/data/dataset.hpp"
#include "deffx/model/spec.hpp"
#include "deffx/train/trainer.hpp"

namespace deffx::cli {

enum class Precision { kF32, kF64 };

struct DataConfig {
  std::filesystem::path manifest;
  data::SegmentConfig segments;
};

struct AnalysisConfig {
  analysis::SweepConfig sweep;
  // Control settings to analyze; empty means one setting of all 0.5.
  std::vector<std::vector<double>> controls;
  std::size_t amplitude_points = 201;
  // Input for time traces of time-varying stages: a sinusoid burst.
  double trace_seconds = 1.0;
  double trace_frequency = 220.0;
  double trace_amplitude = 0.5;
};

struct ExperimentConfig {
  std::string name = "run";
  model::ModelSpec model;
  std::optional<DataConfig> data;
  train::TrainConfig train;
  AnalysisConfig analysis;
  std::filesystem::path output_dir;
  Precision precision = Precision::kF32;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> output_dir;
  std::optional<Precision> precision;
};

std::optional<Precision> parse_precision(const std::string& s);

// Relative paths in the document resolve against `base_dir`; a relative
// output_dir resolves against `output_root` (the DEFFX_OUTPUT_ROOT variable
// when set, else the working directory). A seed override replaces both the
// model and training seeds. Throws ConfigError.
ExperimentConfig parse_experiment(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                                  const Overrides& overrides, const std::filesystem::path& output_root);
ExperimentConfig load_experiment(const std::filesystem::path& path, const Overrides& overrides);
nlohmann::json to_json(const ExperimentConfig& cfg);

// Control settings used by analyze: cfg.controls or a single all-0.5 setting.
std::vector<std::vector<double>> analysis_settings(const ExperimentConfig& cfg);

// Process entry point; returns 0 on success, 2 on invalid configuration or
// arguments, 3 on runtime failure.
int run(int argc, const char* const* argv);

}  // namespace deffx::cli
