#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include "deffx/analysis/response.hpp"
#include "deffx/cli/experiment.hpp"
#include "deffx/core/error.hpp"
#include "deffx/model/checkpoint.hpp"

namespace deffx::cli {

namespace {

// Bad command-line input that is not part of the config document.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct Options {
  std::string command;
  std::filesystem::path config;
  Overrides overrides;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> input;
  std::optional<std::filesystem::path> output;
  std::vector<double> controls;
};

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

data::Splits load_splits(const ExperimentConfig& cfg) {
  if (!cfg.data) throw ConfigError("/data", "this command needs a data section");
  return data::segment(data::load_manifest(cfg.data->manifest), cfg.data->segments);
}

// Loads `path` into the model; any failure is an input error.
template <typename T>
model::Checkpoint load_into(model::Model<T>& m, const std::filesystem::path& path) {
  model::Checkpoint ckpt;
  try {
    ckpt = model::load_checkpoint(path);
    model::restore(m, ckpt);
  } catch (const Error& e) {
    throw UsageError("checkpoint " + path.string() + ": " + e.what());
  }
  return ckpt;
}

// --checkpoint when given, else best.ckpt in the output directory when present.
template <typename T>
void load_weights(model::Model<T>& m, const ExperimentConfig& cfg, const Options& opt, bool required) {
  const std::filesystem::path best = cfg.output_dir / "best.ckpt";
  if (opt.checkpoint) {
    load_into(m, *opt.checkpoint);
  } else if (std::filesystem::exists(best)) {
    load_into(m, best);
  } else if (required) {
    throw UsageError("no checkpoint: pass --checkpoint or train into " + cfg.output_dir.string() + " first");
  } else {
    spdlog::warn("no checkpoint found, using initial weights");
  }
}

std::vector<train::TableRow> table(const std::string& name, const loss::Metrics& m) { return {{name, m}}; }

// --- train ----------------------------------------------------------------------

template <typename T>
struct TrainJob {
  std::unique_ptr<model::Model<T>> model;
  data::Splits splits;
  std::optional<model::Checkpoint> resume;
};

template <typename T>
TrainJob<T> prepare_train(const ExperimentConfig& cfg, const Options& opt) {
  TrainJob<T> job;
  job.model = model::build_model<T>(cfg.model);
  job.splits = load_splits(cfg);
  if (job.splits.train.empty()) throw ConfigError("/data/split", "no training segments");
  if (job.splits.val.empty()) throw ConfigError("/data/split", "no validation segments");
  if (opt.checkpoint) job.resume = load_into(*job.model, *opt.checkpoint);
  return job;
}

template <typename T>
void execute_train(const ExperimentConfig& cfg, TrainJob<T>& job) {
  std::filesystem::create_directories(cfg.output_dir);
  write_json(cfg.output_dir / "config.json", to_json(cfg));
  train::Trainer<T> trainer(*job.model, cfg.train, job.splits, cfg.output_dir);
  if (job.resume) {
    trainer.resume(*job.resume);
    spdlog::info("resumed at step {}", trainer.step());
  }
  trainer.on_row = [](const train::LogRow& r) {
    if (r.phase == "val")
      spdlog::info("step {:>6} val   tot {:.5f} esr {:.5f}", r.step, r.tot, r.esr);
    else
      spdlog::debug("step {:>6} train tot {:.5f}", r.step, r.tot);
  };
  trainer.run();
  trainer.log().write_csv(cfg.output_dir / "run_log.csv");
  if (trainer.skipped() > 0) spdlog::warn("{} steps skipped for non-finite gradients", trainer.skipped());

  load_into(*job.model, cfg.output_dir / "best.ckpt");
  const auto& eval = job.splits.test.empty() ? job.splits.val : job.splits.test;
  if (job.splits.test.empty()) spdlog::warn("no test segments, reporting validation metrics");
  const auto m = train::evaluate(*job.model, eval, cfg.train);
  train::write_metrics_table(cfg.output_dir / "metrics.csv", table(cfg.name, m));
  train::write_full_metrics(cfg.output_dir / "metrics_full.csv", table(cfg.name, m));
  spdlog::info("test tot {:.5f} l1 {:.5f} mrstft {:.5f} esr {:.5f}", m.tot, m.l1, m.mrstft, m.esr);
}

// --- test -----------------------------------------------------------------------

template <typename T>
void execute_test(const ExperimentConfig& cfg, model::Model<T>& m, const data::Splits& splits) {
  std::filesystem::create_directories(cfg.output_dir);
  const auto metrics = train::evaluate(m, splits.test, cfg.train);
  train::write_metrics_table(cfg.output_dir / "test_metrics.csv", table(cfg.name, metrics));
  train::write_full_metrics(cfg.output_dir / "test_metrics_full.csv", table(cfg.name, metrics));
  fmt::print("{},{:.6g},{:.6g},{:.6g}\n", cfg.name, metrics.tot, metrics.l1, metrics.mrstft);
}

// --- analyze --------------------------------------------------------------------

std::vector<double> burst(const AnalysisConfig& a) {
  const auto n = static_cast<std::size_t>(std::llround(a.trace_seconds * a.sweep.fs));
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = a.trace_amplitude * std::sin(2.0 * std::numbers::pi * a.trace_frequency * static_cast<double>(i) / a.sweep.fs);
  return x;
}

template <typename T>
void analyze_stages(const ExperimentConfig& cfg, model::GrayBoxModel<T>& gb, const std::vector<double>& controls,
                    const std::filesystem::path& dir, const std::string& suffix, nlohmann::json& stages) {
  const auto& a = cfg.analysis;
  for (std::size_t i = 0; i < gb.num_stages(); ++i) {
    const auto& proc = gb.processor(i);
    const std::string kind(proc.kind());
    const std::string stem = fmt::format("stage_{}_{}", i, kind);
    const std::string title = fmt::format("stage {}: {}", i, kind);
    nlohmann::json entry = {{"index", i}, {"processor", kind},
                            {"controller", control::controller_kind_name(gb.controller(i).kind())}};
    const bool dynamic = gb.controller(i).kind() == control::ControllerKind::kDynamic ||
                         gb.controller(i).kind() == control::ControllerKind::kDynamicCond;
    if (dynamic) {
      const auto trace = analysis::time_trace(gb, i, burst(a), controls);
      analysis::write_csv(trace, dir / (stem + "_trace" + suffix + ".csv"));
      analysis::write_svg(trace, dir / (stem + "_trace" + suffix + ".svg"), title);
      entry["time_varying"] = true;
      stages.push_back(entry);
      continue;
    }
    const auto params = analysis::stage_parameters(gb, i, controls);
    nlohmann::json values = nlohmann::json::object();
    std::vector<double> physical;
    for (const auto& [name, v] : params) {
      values[name] = v;
      physical.push_back(v);
    }
    entry["parameters"] = values;
    stages.push_back(entry);

    const auto system = analysis::stage_system(gb, i, controls);
    const auto sections = proc.sections(physical);
    if (kind == "gain" || kind == "phase_inversion" || (!proc.memoryless() && sections.empty())) {
      const auto curve = analysis::stepped_sine_response(system, a.sweep, false);
      analysis::write_csv(curve, dir / (stem + "_response" + suffix + ".csv"));
      analysis::write_svg(curve, dir / (stem + "_response" + suffix + ".svg"), title);
    } else if (!sections.empty()) {
      const auto curve = analysis::analytic_response(sections, a.sweep.frequencies(), a.sweep.fs);
      analysis::write_csv(curve, dir / (stem + "_response" + suffix + ".csv"));
      analysis::write_svg(curve, dir / (stem + "_response" + suffix + ".svg"), title);
    } else {
      const auto curve = analysis::amplitude_response(system, a.amplitude_points);
      analysis::write_csv(curve, dir / (stem + "_amplitude" + suffix + ".csv"));
      analysis::write_svg(curve, dir / (stem + "_amplitude" + suffix + ".svg"), title);
    }
  }
}

template <typename T>
void execute_analyze(const ExperimentConfig& cfg, model::Model<T>& m) {
  const std::filesystem::path dir = cfg.output_dir / "analysis";
  std::filesystem::create_directories(dir);
  const auto settings = analysis_settings(cfg);
  auto* gb = dynamic_cast<model::GrayBoxModel<T>*>(&m);
  nlohmann::json report = nlohmann::json::array();
  for (std::size_t k = 0; k < settings.size(); ++k) {
    const std::string suffix = settings.size() > 1 ? fmt::format("_c{}", k) : "";
    const auto curve = analysis::stepped_sine_response(m, cfg.analysis.sweep, settings[k]);
    analysis::write_csv(curve, dir / ("response" + suffix + ".csv"));
    analysis::write_svg(curve, dir / ("response" + suffix + ".svg"), cfg.name);
    if (!gb) continue;
    nlohmann::json stages = nlohmann::json::array();
    analyze_stages(cfg, *gb, settings[k], dir, suffix, stages);
    report.push_back({{"controls", settings[k]}, {"stages", stages}});
  }
  if (gb) write_json(dir / "parameters.json", report);
  spdlog::info("analysis written to {}", dir.string());
}

// --- render ---------------------------------------------------------------------

struct RenderJob {
  data::Audio audio;
  data::SampleFormat format = data::SampleFormat::kFloat32;
  std::filesystem::path output;
};

RenderJob prepare_render(const ExperimentConfig& cfg, const Options& opt) {
  if (!opt.input) throw UsageError("render needs --input");
  if (opt.controls.size() != cfg.model.num_controls)
    throw UsageError(fmt::format("--controls has {} values, model takes {}", opt.controls.size(),
                                 cfg.model.num_controls));
  for (double c : opt.controls)
    if (!(c >= 0.0 && c <= 1.0)) throw UsageError(fmt::format("control {} outside [0, 1]", c));
  RenderJob job;
  try {
    job.format = data::read_wav_info(*opt.input).format;
    job.audio = data::load_wav(*opt.input);
  } catch (const IoError& e) {
    throw UsageError(e.what());
  }
  if (job.audio.sample_rate != cfg.model.sample_rate)
    throw UsageError(fmt::format("{} has sample rate {}, model runs at {}", opt.input->string(),
                                 job.audio.sample_rate, cfg.model.sample_rate));
  job.output = opt.output.value_or(cfg.output_dir / "render" / (opt.input->stem().string() + "_out.wav"));
  return job;
}

template <typename T>
void execute_render(model::Model<T>& m, const RenderJob& job, const Options& opt) {
  const auto y = train::render(m, job.audio.samples, opt.controls);
  if (job.output.has_parent_path()) std::filesystem::create_directories(job.output.parent_path());
  data::save_wav(job.output, y, job.audio.sample_rate, job.format);
  spdlog::info("wrote {}", job.output.string());
}

// Validation and loading happen in `prepare`; errors there are input errors
// (exit 2). Errors while computing are runtime failures (exit 3).
template <typename T>
int dispatch(const ExperimentConfig& cfg, const Options& opt) {
  std::function<void()> work;
  if (opt.command == "train") {
    auto job = std::make_shared<TrainJob<T>>(prepare_train<T>(cfg, opt));
    work = [&cfg, job] { execute_train(cfg, *job); };
  } else {
    std::shared_ptr<model::Model<T>> m = model::build_model<T>(cfg.model);
    if (opt.command == "test") {
      auto splits = std::make_shared<data::Splits>(load_splits(cfg));
      if (splits->test.empty()) throw ConfigError("/data/split", "no test segments");
      load_weights(*m, cfg, opt, true);
      work = [&cfg, m, splits] { execute_test(cfg, *m, *splits); };
    } else if (opt.command == "analyze") {
      load_weights(*m, cfg, opt, false);
      work = [&cfg, m] { execute_analyze(cfg, *m); };
    } else {
      auto job = std::make_shared<RenderJob>(prepare_render(cfg, opt));
      load_weights(*m, cfg, opt, false);
      work = [m, job, &opt] { execute_render(*m, *job, opt); };
    }
  }
  try {
    work();
  } catch (const std::exception& e) {
    spdlog::error("{} failed: {}", opt.command, e.what());
    return 3;
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Differentiable audio effect modeling: train, test, analyze and render"};
  app.require_subcommand(1);
  Options opt;
  std::string precision;
  std::uint64_t seed = 0;
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log every training step");

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opt.config, "Experiment JSON")->required();
    sub->add_option("--output-dir", opt.overrides.output_dir, "Overrides output_dir");
    sub->add_option("--precision", precision, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
    sub->add_option("--checkpoint", opt.checkpoint, "Checkpoint to load (train: resume from it)");
  };
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model");
  add_common(train_cmd);
  train_cmd->add_option("--seed", seed, "Overrides model and training seeds");
  add_common(app.add_subcommand("test", "Evaluate on the test split"));
  add_common(app.add_subcommand("analyze", "Frequency, amplitude and parameter analysis"));
  CLI::App* render_cmd = app.add_subcommand("render", "Process a WAV file");
  add_common(render_cmd);
  render_cmd->add_option("-i,--input", opt.input, "Input WAV")->required();
  render_cmd->add_option("-o,--output", opt.output, "Output WAV");
  render_cmd->add_option("--controls", opt.controls, "Control values in [0, 1]")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  opt.command = app.get_subcommands().front()->get_name();
  if (train_cmd->count("--seed")) opt.overrides.seed = seed;
  if (!precision.empty()) opt.overrides.precision = parse_precision(precision);
  if (!spdlog::get("deffx")) spdlog::set_default_logger(spdlog::stderr_color_mt("deffx"));
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    const ExperimentConfig cfg = load_experiment(opt.config, opt.overrides);
    return cfg.precision == Precision::kF32 ? dispatch<float>(cfg, opt) : dispatch<double>(cfg, opt);
  } catch (const ConfigError& e) {
    spdlog::error("invalid configuration {}", e.what());
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
  } catch (const InvalidArgument& e) {
    spdlog::error("{}", e.what());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 3;
  }
  return 2;
}

}  // namespace deffx::cli
