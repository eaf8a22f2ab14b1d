#pragma once

// Adam, training steps (plain and truncated BPTT), evaluation, and the
// resumable training loop.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "deffx/data/dataset.hpp"
#include "deffx/loss/losses.hpp"
#include "deffx/model/checkpoint.hpp"
#include "deffx/model/model.hpp"

namespace deffx::train {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TbpttConfig {
  bool enabled = false;
  std::size_t chunk_len = 2048;
  std::size_t warmup_len = 1000;
};

struct TrainConfig {
  std::size_t max_steps = 15000;
  std::size_t batch_size = 4;
  AdamConfig adam;
  loss::LossWeights weights;
  loss::MrstftConfig mrstft;
  TbpttConfig tbptt;
  std::size_t val_every = 500;
  // Step decay: lr * lr_decay^floor(step / decay_every); decay_every 0 keeps lr constant.
  double lr_decay = 1.0;
  std::size_t decay_every = 0;
  std::uint64_t seed = 0;

  void validate() const;
  double lr_scale(std::size_t step) const;
};

TrainConfig parse_train_config(const nlohmann::json& doc, const std::string& pointer = "");
nlohmann::json to_json(const TrainConfig& cfg);

template <typename T>
class Adam {
 public:
  Adam(nn::ParamRefs<T> params, AdamConfig cfg);

  // grads[i] belongs to params()[i]. Returns false and changes nothing when a
  // gradient is non-finite.
  bool step(const std::vector<Tensor<T>>& grads, double lr_scale = 1.0);

  std::uint64_t steps() const { return t_; }
  const nn::ParamRefs<T>& params() const { return params_; }
  const Tensor<T>& first_moment(std::size_t i) const { return m_.at(i); }
  const Tensor<T>& second_moment(std::size_t i) const { return v_.at(i); }

  // "adam.t", then "adam.m/<param>" and "adam.v/<param>" for each parameter.
  std::vector<model::NamedTensor> state() const;
  void load_state(const std::vector<model::NamedTensor>& state);

 private:
  nn::ParamRefs<T> params_;
  AdamConfig cfg_;
  std::vector<Tensor<T>> m_, v_;
  std::uint64_t t_ = 0;
};

template <typename T>
struct BatchGradients {
  double tot = 0.0;
  double l1 = 0.0;
  double mrstft = 0.0;
  std::vector<Tensor<T>> grads;  // one per parameter, batch mean
  std::vector<bool> reached;     // parameter appeared on at least one tape
  bool finite = true;
};

// Loss and mean gradient over the batch. Items run on separate tapes and their
// gradients are summed in index order.
template <typename T>
BatchGradients<T> compute_gradients(model::Model<T>& model, const nn::ParamRefs<T>& params,
                               std::span<const data::Segment> batch, const TrainConfig& cfg);

struct StepResult {
  double tot = 0.0;
  double l1 = 0.0;
  double mrstft = 0.0;
  double grad_norm = 0.0;
  bool applied = false;
};

template <typename T>
StepResult train_step(model::Model<T>& model, Adam<T>& adam, std::span<const data::Segment> batch,
                      const TrainConfig& cfg, double lr_scale = 1.0);

struct TbpttResult {
  std::vector<StepResult> chunks;  // one optimizer update each
  StepResult mean;                 // loss averages over chunks; applied if any chunk was
};

// Runs warmup_len samples without gradient to settle the recurrent state,
// then one update per chunk_len chunk with the state carried forward
// detached. Trailing samples that do not fill a chunk are dropped.
template <typename T>
TbpttResult tbptt_train_step(model::Model<T>& model, Adam<T>& adam, const data::Segment& sequence,
                             const TrainConfig& cfg, double lr_scale = 1.0);

// Per-segment metrics (model in eval mode, fresh state per segment) and
// their mean.
template <typename T>
loss::Metrics evaluate(model::Model<T>& model, std::span<const data::Segment> segments, const TrainConfig& cfg,
                       std::vector<loss::Metrics>* rows = nullptr);

// Model output for one segment in eval mode.
template <typename T>
std::vector<double> render(model::Model<T>& model, const std::vector<double>& x, const std::vector<double>& controls);

struct LogRow {
  std::size_t step = 0;
  std::string phase;  // "train" or "val"
  double tot = 0.0;
  double l1 = 0.0;
  double mrstft = 0.0;
  // Validation rows only; NaN on train rows.
  double esr = std::numeric_limits<double>::quiet_NaN();
  double dc = std::numeric_limits<double>::quiet_NaN();
  double mae = std::numeric_limits<double>::quiet_NaN();
  double mse = std::numeric_limits<double>::quiet_NaN();
  double mape = std::numeric_limits<double>::quiet_NaN();
  std::size_t skipped = 0;  // non-finite steps so far
  double wall_s = 0.0;

  // Everything except wall-clock time.
  bool same_values(const LogRow& o) const;
};

struct RunLog {
  std::vector<LogRow> rows;
  // step,loss_tot,loss_l1,loss_mrstft,phase,esr,dc,mae,mse,mape,skipped,wall_s
  void write_csv(const std::filesystem::path& path) const;
};

struct TableRow {
  std::string model;
  loss::Metrics metrics;
};
// model,tot,l1,mrstft
void write_metrics_table(const std::filesystem::path& path, std::span<const TableRow> rows);
// model,tot,l1,mrstft,esr,dc,mae,mse,mape
void write_full_metrics(const std::filesystem::path& path, std::span<const TableRow> rows);

template <typename T>
class Trainer {
 public:
  // `checkpoint_dir` receives last.ckpt and best.ckpt at every validation and
  // at the end; empty disables checkpoint files.
  Trainer(model::Model<T>& model, TrainConfig cfg, const data::Splits& data, std::filesystem::path checkpoint_dir = {});

  // Trains until `until` steps are done (capped at max_steps).
  void run(std::size_t until = std::numeric_limits<std::size_t>::max());

  model::Checkpoint checkpoint() const;
  // Restores model, optimizer and loop state from a checkpoint of this run.
  void resume(const model::Checkpoint& ckpt);

  // Training segment indices used at `step`: a pure function of seed and step
  // drawn from per-epoch permutations.
  std::vector<std::size_t> batch_indices(std::size_t step) const;

  std::size_t step() const { return step_; }
  std::size_t skipped() const { return skipped_; }
  double best_val() const { return best_val_; }
  const RunLog& log() const { return log_; }
  Adam<T>& optimizer() { return adam_; }
  std::function<void(const LogRow&)> on_row;

 private:
  LogRow validate_now();
  void save(const std::string& name) const;

  model::Model<T>& model_;
  TrainConfig cfg_;
  const data::Splits& data_;
  std::filesystem::path dir_;
  Adam<T> adam_;
  std::size_t step_ = 0;
  std::size_t skipped_ = 0;
  double best_val_ = std::numeric_limits<double>::infinity();
  RunLog log_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace deffx::train
