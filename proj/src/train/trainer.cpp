#include "deffx/train/trainer.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "deffx/core/error.hpp"
#include "deffx/core/rng.hpp"
#include "deffx/model/spec.hpp"

namespace deffx::train {

namespace {

template <typename T>
Var<T> signal(Tape<T>& tape, std::span<const double> s) {
  return tape.constant(Tensor<T>({1, s.size()}, std::vector<T>(s.begin(), s.end())));
}

template <typename T>
Var<T> controls(Tape<T>& tape, const std::vector<double>& c) {
  if (c.empty()) return {};
  return tape.constant(Tensor<T>::vector(std::vector<T>(c.begin(), c.end())));
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (T v : t.storage())
    if (!std::isfinite(v)) return false;
  return true;
}

template <typename T>
double l2_norm(const std::vector<Tensor<T>>& grads) {
  double s = 0.0;
  for (const auto& g : grads)
    for (T v : g.storage()) s += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(s);
}

// Loss and gradient of one segment slice on `tape`; no backward pass when the
// loss is not finite.
template <typename T>
std::pair<loss::LossTerms<T>, Gradients<T>> item_gradients(Tape<T>& tape, model::Model<T>& model,
                                                         std::span<const double> x, std::span<const double> y,
                                                         const std::vector<double>& c,
                                                         model::ModelState<std::type_identity_t<T>>* state,
                                                         const TrainConfig& cfg) {
  const Var<T> y_hat = model.forward(signal(tape, x), controls(tape, c), state, true);
  auto terms = loss::combined_loss(signal(tape, y), y_hat, cfg.weights, cfg.mrstft);
  if (!std::isfinite(static_cast<double>(terms.total.value()[0]))) return {terms, Gradients<T>{}};
  auto grads = tape.backward(terms.total);
  return {terms, std::move(grads)};
}

std::uint64_t epoch_seed(std::uint64_t seed, std::uint64_t epoch) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (epoch + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::string csv_number(double v) { return std::isnan(v) ? std::string() : fmt::format("{}", v); }

}  // namespace

// --- Adam ---------------------------------------------------------------------

template <typename T>
Adam<T>::Adam(nn::ParamRefs<T> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (auto* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

template <typename T>
bool Adam<T>::step(const std::vector<Tensor<T>>& grads, double lr_scale) {
  if (grads.size() != params_.size())
    throw InvalidArgument(fmt::format("Adam got {} gradients for {} parameters", grads.size(), params_.size()));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].size() != params_[i]->value.size())
      throw InvalidArgument("gradient shape mismatch for " + params_[i]->name);
    if (!all_finite(grads[i])) return false;
  }
  ++t_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = cfg_.lr * lr_scale;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto p = params_[i]->value.data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    const auto g = grads[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k];
      const double mk = b1 * static_cast<double>(m[k]) + (1.0 - b1) * gk;
      const double vk = b2 * static_cast<double>(v[k]) + (1.0 - b2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      p[k] = static_cast<T>(static_cast<double>(p[k]) - lr * (mk / c1) / (std::sqrt(vk / c2) + cfg_.eps));
    }
  }
  return true;
}

template <typename T>
std::vector<model::NamedTensor> Adam<T>::state() const {
  std::vector<model::NamedTensor> out;
  out.push_back({"adam.t", {1}, {static_cast<double>(t_)}});
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.push_back({"adam.m/" + params_[i]->name, m_[i].shape(), {m_[i].storage().begin(), m_[i].storage().end()}});
    out.push_back({"adam.v/" + params_[i]->name, v_[i].shape(), {v_[i].storage().begin(), v_[i].storage().end()}});
  }
  return out;
}

template <typename T>
void Adam<T>::load_state(const std::vector<model::NamedTensor>& state) {
  std::map<std::string, const model::NamedTensor*> by_name;
  for (const auto& t : state) by_name[t.name] = &t;
  auto get = [&](const std::string& name) -> const model::NamedTensor& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw InvalidArgument("optimizer state lacks " + name);
    return *it->second;
  };
  const auto& t = get("adam.t");
  if (t.data.size() != 1) throw InvalidArgument("malformed adam.t");
  std::vector<Tensor<T>> m, v;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    for (auto [prefix, dest] : {std::pair{"adam.m/", &m}, std::pair{"adam.v/", &v}}) {
      const auto& src = get(prefix + params_[i]->name);
      if (src.shape != params_[i]->value.shape())
        throw InvalidArgument("optimizer state shape mismatch for " + params_[i]->name);
      dest->emplace_back(src.shape, std::vector<T>(src.data.begin(), src.data.end()));
    }
  }
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = static_cast<std::uint64_t>(t.data[0]);
}

// --- steps ----------------------------------------------------------------------

template <typename T>
BatchGradients<T> compute_gradients(model::Model<T>& model, const nn::ParamRefs<T>& params,
                                    std::span<const data::Segment> batch, const TrainConfig& cfg) {
  if (batch.empty()) throw InvalidArgument("empty batch");
  BatchGradients<T> out;
  for (auto* p : params) out.grads.emplace_back(p->value.shape());
  out.reached.assign(params.size(), false);
  for (const auto& item : batch) {
    if (item.x.size() != item.y.size()) throw InvalidArgument("segment input and target lengths differ");
    Tape<T> tape;
    auto [terms, grads] = item_gradients(tape, model, item.x, item.y, item.controls, nullptr, cfg);
    out.tot += static_cast<double>(terms.total.value()[0]);
    out.l1 += terms.l1;
    out.mrstft += terms.mrstft;
    if (!std::isfinite(static_cast<double>(terms.total.value()[0]))) {
      out.finite = false;
      continue;
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Tensor<T>* g = grads.find(*params[i]);
      if (!g) continue;
      out.reached[i] = true;
      auto dst = out.grads[i].data();
      const auto src = g->data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
  const double n = static_cast<double>(batch.size());
  out.tot /= n;
  out.l1 /= n;
  out.mrstft /= n;
  const T inv = static_cast<T>(1.0 / n);
  for (auto& g : out.grads)
    for (T& v : g.storage()) v *= inv;
  if (!std::isfinite(out.tot)) out.finite = false;
  for (const auto& g : out.grads)
    if (!all_finite(g)) out.finite = false;
  return out;
}

template <typename T>
StepResult train_step(model::Model<T>& model, Adam<T>& adam, std::span<const data::Segment> batch,
                      const TrainConfig& cfg, double lr_scale) {
  const auto g = compute_gradients(model, adam.params(), batch, cfg);
  StepResult r{g.tot, g.l1, g.mrstft, l2_norm(g.grads), false};
  if (g.finite) r.applied = adam.step(g.grads, lr_scale);
  if (!r.applied) spdlog::warn("skipping update: non-finite loss or gradient (loss {})", r.tot);
  return r;
}

template <typename T>
TbpttResult tbptt_train_step(model::Model<T>& model, Adam<T>& adam, const data::Segment& seq, const TrainConfig& cfg,
                             double lr_scale) {
  if (!model.recurrent()) throw InvalidArgument("truncated BPTT needs a model with recurrent state");
  const std::size_t chunk = cfg.tbptt.chunk_len, warm = cfg.tbptt.warmup_len, length = seq.x.size();
  if (seq.y.size() != length) throw InvalidArgument("segment input and target lengths differ");
  if (chunk == 0 || warm + chunk > length)
    throw InvalidArgument(fmt::format("chunk_len {} plus warmup {} exceeds the {}-sample sequence", chunk, warm, length));
  const std::span<const double> x(seq.x), y(seq.y);
  model::ModelState<T> state;
  if (warm > 0) {
    Tape<T> tape;
    tape.set_grad_enabled(false);
    model.forward(signal(tape, x.first(warm)), controls(tape, seq.controls), &state, false);
  }
  TbpttResult out;
  const std::size_t updates = (length - warm) / chunk;
  const auto& params = adam.params();
  for (std::size_t k = 0; k < updates; ++k) {
    const std::size_t start = warm + k * chunk;
    Tape<T> tape;
    auto [terms, grads] = item_gradients(tape, model, x.subspan(start, chunk), y.subspan(start, chunk), seq.controls,
                                         &state, cfg);
    StepResult r{static_cast<double>(terms.total.value()[0]), terms.l1, terms.mrstft, 0.0, false};
    if (std::isfinite(r.tot)) {
      std::vector<Tensor<T>> g;
      for (auto* p : params) {
        const Tensor<T>* gi = grads.find(*p);
        g.push_back(gi ? *gi : Tensor<T>(p->value.shape()));
      }
      r.grad_norm = l2_norm(g);
      r.applied = adam.step(g, lr_scale);
    }
    if (!r.applied) {
      spdlog::warn("skipping chunk update: non-finite loss or gradient (loss {})", r.tot);
      state.clear();
    }
    out.chunks.push_back(r);
  }
  for (const auto& r : out.chunks) {
    out.mean.tot += r.tot / static_cast<double>(updates);
    out.mean.l1 += r.l1 / static_cast<double>(updates);
    out.mean.mrstft += r.mrstft / static_cast<double>(updates);
    out.mean.grad_norm = std::max(out.mean.grad_norm, r.grad_norm);
    out.mean.applied = out.mean.applied || r.applied;
  }
  return out;
}

template <typename T>
std::vector<double> render(model::Model<T>& model, const std::vector<double>& x, const std::vector<double>& c) {
  Tape<T> tape;
  tape.set_grad_enabled(false);
  const auto& y = model.forward(signal(tape, std::span<const double>(x)), controls(tape, c), nullptr, false).value();
  return {y.storage().begin(), y.storage().end()};
}

template <typename T>
loss::Metrics evaluate(model::Model<T>& model, std::span<const data::Segment> segments, const TrainConfig& cfg,
                       std::vector<loss::Metrics>* rows) {
  if (segments.empty()) throw InvalidArgument("no segments to evaluate");
  std::vector<loss::Metrics> all;
  for (const auto& s : segments) all.push_back(loss::compute_metrics(s.y, render(model, s.x, s.controls), cfg.weights, cfg.mrstft));
  if (rows) *rows = all;
  return loss::mean_metrics(all);
}

// --- logs and tables ------------------------------------------------------------

bool LogRow::same_values(const LogRow& o) const {
  auto eq = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
  return step == o.step && phase == o.phase && eq(tot, o.tot) && eq(l1, o.l1) && eq(mrstft, o.mrstft) &&
         eq(esr, o.esr) && eq(dc, o.dc) && eq(mae, o.mae) && eq(mse, o.mse) && eq(mape, o.mape) &&
         skipped == o.skipped;
}

void RunLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "step,loss_tot,loss_l1,loss_mrstft,phase,esr,dc,mae,mse,mape,skipped,wall_s\n";
  for (const auto& r : rows)
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{:.3f}\n", r.step, r.tot, r.l1, r.mrstft, r.phase,
                       csv_number(r.esr), csv_number(r.dc), csv_number(r.mae), csv_number(r.mse), csv_number(r.mape),
                       r.skipped, r.wall_s);
  if (!out) throw IoError("write failed for " + path.string());
}

void write_metrics_table(const std::filesystem::path& path, std::span<const TableRow> rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "model,tot,l1,mrstft\n";
  for (const auto& r : rows) out << fmt::format("{},{},{},{}\n", r.model, r.metrics.tot, r.metrics.l1, r.metrics.mrstft);
  if (!out) throw IoError("write failed for " + path.string());
}

void write_full_metrics(const std::filesystem::path& path, std::span<const TableRow> rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "model,tot,l1,mrstft,esr,dc,mae,mse,mape\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out << fmt::format("{},{},{},{},{},{},{},{},{}\n", r.model, m.tot, m.l1, m.mrstft, m.esr, m.dc, m.l1, m.mse, m.mape);
  }
  if (!out) throw IoError("write failed for " + path.string());
}

// --- trainer ----------------------------------------------------------------------

template <typename T>
Trainer<T>::Trainer(model::Model<T>& model, TrainConfig cfg, const data::Splits& data, std::filesystem::path dir)
    : model_(model),
      cfg_(std::move(cfg)),
      data_(data),
      dir_(std::move(dir)),
      adam_(model.parameters(), cfg_.adam),
      start_(std::chrono::steady_clock::now()) {
  cfg_.validate();
  if (data_.train.empty()) throw InvalidArgument("no training segments");
  if (cfg_.tbptt.enabled && !model_.recurrent())
    throw InvalidArgument("tbptt is enabled but the model has no recurrent state");
}

template <typename T>
std::vector<std::size_t> Trainer<T>::batch_indices(std::size_t step) const {
  const std::size_t n = data_.train.size();
  const std::size_t per_step = cfg_.tbptt.enabled ? 1 : cfg_.batch_size;
  std::vector<std::size_t> out;
  std::uint64_t cached_epoch = UINT64_MAX;
  std::vector<std::size_t> perm(n);
  for (std::size_t j = 0; j < per_step; ++j) {
    const std::uint64_t pos = static_cast<std::uint64_t>(step) * per_step + j;
    const std::uint64_t epoch = pos / n;
    if (epoch != cached_epoch) {
      std::iota(perm.begin(), perm.end(), 0);
      Rng rng(epoch_seed(cfg_.seed, epoch));
      rng.shuffle(perm);
      cached_epoch = epoch;
    }
    out.push_back(perm[pos % n]);
  }
  return out;
}

template <typename T>
void Trainer<T>::run(std::size_t until) {
  const std::size_t end = std::min(until, cfg_.max_steps);
  while (step_ < end) {
    const auto idx = batch_indices(step_);
    const double scale = cfg_.lr_scale(step_);
    StepResult r;
    if (cfg_.tbptt.enabled) {
      r = tbptt_train_step(model_, adam_, data_.train[idx[0]], cfg_, scale).mean;
    } else {
      std::vector<data::Segment> batch;
      batch.reserve(idx.size());
      for (std::size_t i : idx) batch.push_back(data_.train[i]);
      r = train_step(model_, adam_, std::span<const data::Segment>(batch), cfg_, scale);
    }
    if (!r.applied) ++skipped_;
    ++step_;
    LogRow row;
    row.step = step_;
    row.phase = "train";
    row.tot = r.tot;
    row.l1 = r.l1;
    row.mrstft = r.mrstft;
    row.skipped = skipped_;
    row.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    log_.rows.push_back(row);
    if (on_row) on_row(row);
    if (step_ % cfg_.val_every == 0 || step_ == cfg_.max_steps) validate_now();
  }
}

template <typename T>
LogRow Trainer<T>::validate_now() {
  LogRow row;
  row.step = step_;
  row.phase = "val";
  row.skipped = skipped_;
  if (!data_.val.empty()) {
    const loss::Metrics m = evaluate(model_, std::span<const data::Segment>(data_.val), cfg_);
    row.tot = m.tot;
    row.l1 = m.l1;
    row.mrstft = m.mrstft;
    row.esr = m.esr;
    row.dc = m.dc;
    row.mae = m.l1;
    row.mse = m.mse;
    row.mape = m.mape;
    row.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    log_.rows.push_back(row);
    if (on_row) on_row(row);
    if (m.tot < best_val_) {
      best_val_ = m.tot;
      save("best.ckpt");
    }
  }
  save("last.ckpt");
  return row;
}

template <typename T>
model::Checkpoint Trainer<T>::checkpoint() const {
  model::Checkpoint c;
  c.spec_json = model::to_json(model_.spec()).dump();
  c.step = step_;
  c.model = model::snapshot(model_);
  c.optimizer = adam_.state();
  c.extra_json = nlohmann::json{{"skipped", skipped_},
                                {"best_val", std::isfinite(best_val_) ? nlohmann::json(best_val_) : nlohmann::json()},
                                {"train", to_json(cfg_)}}
                     .dump();
  return c;
}

template <typename T>
void Trainer<T>::save(const std::string& name) const {
  if (dir_.empty()) return;
  model::save_checkpoint(dir_ / name, checkpoint());
}

template <typename T>
void Trainer<T>::resume(const model::Checkpoint& ckpt) {
  model::restore(model_, ckpt);
  adam_.load_state(ckpt.optimizer);
  step_ = ckpt.step;
  const auto extra = nlohmann::json::parse(ckpt.extra_json);
  skipped_ = extra.value("skipped", std::size_t{0});
  best_val_ = extra.contains("best_val") && extra["best_val"].is_number() ? extra["best_val"].get<double>()
                                                                         : std::numeric_limits<double>::infinity();
}

#define DEFFX_TRAIN(T)                                                                                             \
  template class Adam<T>;                                                                                          \
  template BatchGradients<T> compute_gradients(model::Model<T>&, const nn::ParamRefs<T>&,                          \
                                               std::span<const data::Segment>, const TrainConfig&);                \
  template StepResult train_step(model::Model<T>&, Adam<T>&, std::span<const data::Segment>, const TrainConfig&,  \
                                 double);                                                                          \
  template TbpttResult tbptt_train_step(model::Model<T>&, Adam<T>&, const data::Segment&, const TrainConfig&,     \
                                        double);                                                                   \
  template std::vector<double> render(model::Model<T>&, const std::vector<double>&, const std::vector<double>&);  \
  template loss::Metrics evaluate(model::Model<T>&, std::span<const data::Segment>, const TrainConfig&,            \
                                  std::vector<loss::Metrics>*);                                                    \
  template class Trainer<T>;
DEFFX_TRAIN(float)
DEFFX_TRAIN(double)

}  // namespace deffx::train
