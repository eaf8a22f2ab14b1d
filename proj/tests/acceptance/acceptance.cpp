// Acceptance suite: one PASS/FAIL line per criterion on stdout, progress on
// stderr. `acceptance --only N` runs a single criterion.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include "deffx/analysis/response.hpp"
#include "deffx/autodiff/grad_check.hpp"
#include "deffx/cond/conditioning.hpp"
#include "deffx/control/controllers.hpp"
#include "deffx/dsp/biquad.hpp"
#include "deffx/dsp/prefit.hpp"
#include "deffx/dsp/processors.hpp"
#include "deffx/loss/losses.hpp"
#include "deffx/model/model.hpp"
#include "deffx/train/trainer.hpp"
#include "grad_cases.hpp"

namespace fs = std::filesystem;

namespace deffx::acceptance {
namespace {

using V = Var<double>;
using Args = std::span<const V>;
constexpr double kFs = 48000.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

// --- shared helpers ---------------------------------------------------------------

Tensor<double> signal(const std::vector<double>& x) { return Tensor<double>({1, x.size()}, x); }

std::vector<double> run_processor(const dsp::Processor<double>& p, const std::vector<double>& x,
                                  const std::vector<double>& u) {
  Tape<double> t;
  t.set_grad_enabled(false);
  const V xv = t.constant(signal(x));
  if (u.empty()) return p.process(xv, nullptr).value().storage();
  dsp::Controls<double> c{t.constant(Tensor<double>::vector(u)), 0};
  return p.process(xv, &c).value().storage();
}

std::unique_ptr<dsp::Processor<double>> processor(const std::string& kind, std::uint64_t seed = 1) {
  Rng rng(seed);
  return dsp::make_processor<double>({.kind = kind, .fir_taps = 8, .siren_hidden = 4, .siren_layers = 1}, kFs, rng,
                                     kind);
}

// Independent direct-form I recursion of one biquad section.
std::vector<double> recursion(const std::vector<double>& x, const dsp::BiquadSection& s) {
  std::vector<double> y(x.size());
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    y[n] = (s.b0 * x[n] + s.b1 * x1 + s.b2 * x2 - s.a1 * y1 - s.a2 * y2) / s.a0;
    x2 = x1;
    x1 = x[n];
    y2 = y1;
    y1 = y[n];
  }
  return y;
}

// White noise plus a few slowly enveloped tones.
std::vector<double> excitation(std::size_t n, double fs, double noise_level, std::uint64_t seed) {
  auto x = test::uniform(n, seed, -noise_level, noise_level);
  const auto f = test::uniform(6, seed + 1, std::log(60.0), std::log(6000.0));
  const auto a = test::uniform(6, seed + 2, 0.02, 0.12);
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double freq = std::exp(f[k]), rate = 0.2 + 0.1 * static_cast<double>(k);
    for (std::size_t i = 0; i < n; ++i) {
      const double time = static_cast<double>(i) / fs;
      x[i] += a[k] * (0.5 + 0.5 * std::sin(2 * std::numbers::pi * rate * time)) *
              std::sin(2 * std::numbers::pi * freq * time);
    }
  }
  return x;
}

std::vector<data::Segment> cut(const std::vector<double>& x, const std::vector<double>& y, std::size_t begin,
                               std::size_t end, std::size_t length, const std::vector<double>& controls) {
  std::vector<data::Segment> out;
  for (std::size_t off = begin; off + length <= end; off += length) {
    data::Segment s;
    s.x.assign(x.begin() + static_cast<std::ptrdiff_t>(off), x.begin() + static_cast<std::ptrdiff_t>(off + length));
    s.y.assign(y.begin() + static_cast<std::ptrdiff_t>(off), y.begin() + static_cast<std::ptrdiff_t>(off + length));
    s.controls = controls;
    s.offset = off;
    out.push_back(std::move(s));
  }
  return out;
}

// Contiguous 80/10/10 split of one recording.
void split_into(data::Splits& splits, const std::vector<double>& x, const std::vector<double>& y, std::size_t length,
                const std::vector<double>& controls) {
  const std::size_t n = x.size(), a = n * 8 / 10, b = n * 9 / 10;
  for (auto& s : cut(x, y, 0, a, length, controls)) splits.train.push_back(std::move(s));
  for (auto& s : cut(x, y, a, b, length, controls)) splits.val.push_back(std::move(s));
  for (auto& s : cut(x, y, b, n, length, controls)) splits.test.push_back(std::move(s));
}

template <typename T>
void log_progress(train::Trainer<T>& trainer, const char* tag) {
  trainer.on_row = [tag](const train::LogRow& r) {
    if (r.phase == "val") spdlog::info("[{}] step {:>5}  val tot {:.4f}  esr {:.5f}", tag, r.step, r.tot, r.esr);
  };
}

// --- 1: gradient suite --------------------------------------------------------------

struct Check {
  std::string name;
  std::function<GradCheckReport()> run;
};

Check input_check(std::string name, GradFn f, std::vector<Tensor<double>> inputs) {
  return {std::move(name), [f = std::move(f), inputs = std::move(inputs)] { return grad_check(f, inputs); }};
}

template <typename Module>
Check param_check(std::string name, std::shared_ptr<Module> m, std::function<V(Module&, Tape<double>&)> f) {
  return {std::move(name), [m, f] {
            nn::ParamRefs<double> p;
            m->collect(p);
            return grad_check([&](Tape<double>& t) { return f(*m, t); }, p);
          }};
}

std::vector<Check> gradient_checks() {
  using test::random_tensor;
  std::vector<Check> checks;
  for (auto& c : test::primitive_cases()) checks.push_back(input_check(std::string("op.") + c.name, c.f, c.inputs));

  // Processors with static and per-block controls, with respect to signal and controls.
  auto controlled = [&](const std::string& kind, std::size_t block, std::size_t len) {
    auto p = std::shared_ptr<dsp::Processor<double>>(processor(kind));
    const std::size_t blocks = block ? (len + block - 1) / block : 1;
    const Shape gs = block ? Shape{blocks, p->num_params()} : Shape{p->num_params()};
    const Tensor<double> w = random_tensor({1, len}, 77, 0.5, 1.5);
    checks.push_back(input_check(
        "processor." + kind + (block ? ".blocks" : ""),
        [p, block, w](Tape<double>& t, Args a) {
          dsp::Controls<double> c{a[1], block};
          return sum(p->process(a[0], &c) * t.constant(w));
        },
        {random_tensor({1, len}, 1), random_tensor(gs, 2, 0.2, 0.8)}));
  };
  for (const char* kind : {"gain", "dc_offset", "lowpass", "highpass", "lowshelf", "highshelf", "peak", "parametric_eq",
                           "shelving_eq"})
    controlled(kind, 0, 256);
  for (const char* kind : {"gain", "dc_offset", "lowpass", "peak", "shelving_eq"}) controlled(kind, 32, 200);
  for (const char* kind : {"phase_inversion", "tanh", "static_fir", "static_mlp", "static_rational"}) {
    auto p = std::shared_ptr<dsp::Processor<double>>(processor(kind));
    const Tensor<double> w = random_tensor({1, 64}, 9, 0.5, 1.5);
    checks.push_back(input_check(
        std::string("processor.") + kind,
        [p, w](Tape<double>& t, Args a) { return sum(p->process(a[0], nullptr) * t.constant(w)); },
        {random_tensor({1, 64}, 4, -2, 2)}));
    nn::ParamRefs<double> params;
    p->collect(params);
    if (params.empty()) continue;
    const Tensor<double> x = random_tensor({1, 64}, 5, -2, 2);
    checks.push_back(param_check<dsp::Processor<double>>(
        std::string("processor.") + kind + ".weights", p,
        [x, w](dsp::Processor<double>& proc, Tape<double>& t) {
          return sum(proc.process(t.constant(x), nullptr) * t.constant(w));
        }));
  }
  {
    const Tensor<double> x = random_tensor({1, 96}, 6);
    auto rows = [](Tape<double>& t, Args a) {
      return sum(dsp::biquad_rows(dsp::FilterKind::kPeak, a[0], a[1], a[2], kFs) *
                 t.constant(random_tensor({2, 6}, 3, 0.5, 1.5)));
    };
    checks.push_back(input_check("dsp.biquad_rows", rows,
                                 {Tensor<double>::vector({3.0, -6.0}), Tensor<double>::vector({500.0, 4000.0}),
                                  Tensor<double>::vector({0.8, 2.0})}));
    checks.push_back(input_check(
        "dsp.hold_blocks", [](Tape<double>&, Args a) { return test::probe(dsp::hold_blocks(a[0], 8, 30)); },
        {random_tensor({4}, 7)}));
    checks.push_back(input_check(
        "dsp.fir_filter", [](Tape<double>&, Args a) { return test::probe(dsp::fir_filter(a[0], a[1])); },
        {x, random_tensor({9}, 8)}));
  }

  // Controllers: parameters and inputs.
  auto controller = [&](control::ControllerKind kind, std::size_t nc) {
    Rng rng(3);
    control::ControllerConfig cfg{.kind = kind, .mlp_hidden = 4, .block_size = 16};
    auto ctl = std::make_shared<control::Controller<double>>(cfg, 3, nc, "ctl", rng);
    const std::string name = "controller." + std::string(control::controller_kind_name(kind));
    const Tensor<double> x = random_tensor({1, 80}, 10);
    const Tensor<double> c = random_tensor({nc}, 11, 0.1, 0.9);
    const bool dynamic = ctl->recurrent();
    const Tensor<double> w = random_tensor(dynamic ? Shape{5, 3} : Shape{3}, 12, 0.5, 1.5);
    checks.push_back(param_check<control::Controller<double>>(
        name + ".weights", ctl, [x, c, nc, w](control::Controller<double>& m, Tape<double>& t) {
          return sum(m(t.constant(x), nc ? t.constant(c) : V{}, nullptr).values * t.constant(w));
        }));
    if (nc || dynamic) {
      checks.push_back(input_check(
          name + ".inputs",
          [ctl, nc, w](Tape<double>& t, Args a) { return sum((*ctl)(a[0], nc ? a[1] : V{}, nullptr).values * t.constant(w)); },
          nc ? std::vector<Tensor<double>>{x, c} : std::vector<Tensor<double>>{x}));
    }
  };
  controller(control::ControllerKind::kStatic, 0);
  controller(control::ControllerKind::kStaticCond, 2);
  controller(control::ControllerKind::kDynamic, 0);
  controller(control::ControllerKind::kDynamicCond, 2);

  // Conditioning.
  {
    Rng rng(4);
    auto gen = std::make_shared<cond::FilmGenerator<double>>("gen", 2, 4, 5, rng);
    auto head = std::make_shared<cond::FilmHead<double>>("head", 5, 3, false, rng);
    const Tensor<double> w = random_tensor({3, 40}, 13);
    checks.push_back(input_check(
        "cond.film",
        [gen, head, w](Tape<double>& t, Args a) {
          const auto [gamma, beta] = (*head)((*gen)(a[0]));
          return sum(cond::film_apply(a[1], gamma, beta) * t.constant(w));
        },
        {Tensor<double>::vector({0.3, 0.6}), random_tensor({3, 40}, 14)}));
    checks.push_back(input_check(
        "cond.film_apply_blocks",
        [](Tape<double>&, Args a) { return test::probe(cond::film_apply_blocks(a[0], a[1], a[2], 8)); },
        {random_tensor({2, 30}, 15), random_tensor({2, 4}, 16), random_tensor({2, 4}, 17)}));
    const Tensor<double> h = random_tensor({3, 48}, 18);
    const Tensor<double> c = Tensor<double>::vector({0.6});
    const Tensor<double> w2 = random_tensor({3, 48}, 19, 0.5, 1.5);
    auto tf = std::make_shared<cond::TFilm<double>>("tf", 3, 1, 8, false, rng);
    checks.push_back(input_check(
        "cond.tfilm", [tf, w2](Tape<double>& t, Args a) { return sum((*tf)(a[0], a[1], nullptr) * t.constant(w2)); },
        {h, c}));
    checks.push_back(param_check<cond::TFilm<double>>("cond.tfilm.weights", tf,
                                                      [h, c, w2](cond::TFilm<double>& m, Tape<double>& t) {
                                                        return sum(m(t.constant(h), t.constant(c), nullptr) *
                                                                   t.constant(w2));
                                                      }));
    auto tt = std::make_shared<cond::TTFilm<double>>("tt", 3, 1, 8, 2, 3, false, rng);
    checks.push_back(input_check(
        "cond.ttfilm", [tt, w2](Tape<double>& t, Args a) { return sum((*tt)(a[0], a[1], nullptr) * t.constant(w2)); },
        {h, c}));
    checks.push_back(param_check<cond::TTFilm<double>>("cond.ttfilm.weights", tt,
                                                       [h, c, w2](cond::TTFilm<double>& m, Tape<double>& t) {
                                                         return sum(m(t.constant(h), t.constant(c), nullptr) *
                                                                    t.constant(w2));
                                                       }));
    auto tv = std::make_shared<cond::TVFilmController<double>>("tv", 1, 3, 8, rng);
    auto tv_head = std::make_shared<cond::FilmHead<double>>("tvh", 3, 3, false, rng);
    checks.push_back(input_check(
        "cond.tvfilm",
        [tv, tv_head, w2](Tape<double>& t, Args a) {
          return sum(cond::tvfilm_modulate(a[2], *tv_head, (*tv)(a[0], a[1], nullptr), 8) * t.constant(w2));
        },
        {random_tensor({1, 48}, 20), c, h}));
    checks.push_back(param_check<cond::TVFilmController<double>>(
        "cond.tvfilm.weights", tv, [tv_head, h, c, w2](cond::TVFilmController<double>& m, Tape<double>& t) {
          const V x = t.constant(random_tensor({1, 48}, 20));
          return sum(cond::tvfilm_modulate(t.constant(h), *tv_head, m(x, t.constant(c), nullptr), 8) *
                     t.constant(w2));
        }));
    const Tensor<double> w3 = random_tensor({3, 48}, 21, 0.5, 1.5);
    checks.push_back(input_check(
        "cond.tvcond",
        [tv, w3](Tape<double>& t, Args a) {
          return sum(cond::tvcond_generate(*tv, a[0], a[1], nullptr) * t.constant(w3));
        },
        {random_tensor({1, 48}, 22), c}));
  }

  // Losses used for training.
  {
    const loss::MrstftConfig small{.resolutions = {{64, 16, 64}, {128, 32, 128}}};
    const Tensor<double> y = random_tensor({1, 300}, 23);
    checks.push_back(input_check(
        "loss.combined",
        [y, small](Tape<double>& t, Args a) {
          return loss::combined_loss(t.constant(y), a[0], {1.0, 1.0}, small).total + loss::esr(t.constant(y), a[0]) +
                 loss::dc_loss(t.constant(y), a[0]) + loss::mse(t.constant(y), a[0]);
        },
        {random_tensor({1, 300}, 24)}));
  }
  return checks;
}

Outcome gradient_suite() {
  std::size_t failed = 0, total = 0;
  double worst = 0.0;
  std::string worst_name, failures;
  for (const auto& c : gradient_checks()) {
    const auto r = c.run();
    ++total;
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_name = c.name;
    }
    if (!(r.max_rel_error < 1e-4)) {
      ++failed;
      failures += fmt::format(" {}={:.2e}", c.name, r.max_rel_error);
    }
  }
  return {failed == 0, fmt::format("{} checks, worst {} at {:.2e} (limit 1e-4){}", total, worst_name, worst,
                                   failed ? ";" + failures : "")};
}

// --- 2: filter oracle ---------------------------------------------------------------

Outcome filter_oracle() {
  const auto x = test::uniform(static_cast<std::size_t>(kFs), 2024);
  const std::size_t n = dsp::fft_size_for(x.size());
  Rng rng(17);
  double worst = 0.0;
  std::string worst_kind;
  for (auto kind : {dsp::FilterKind::kLowpass, dsp::FilterKind::kHighpass, dsp::FilterKind::kLowShelf,
                    dsp::FilterKind::kHighShelf, dsp::FilterKind::kPeak}) {
    for (int trial = 0; trial < 20; ++trial) {
      dsp::FilterParams p;
      p.kind = kind;
      p.fs = kFs;
      p.f0 = std::exp(rng.uniform(std::log(20.0), std::log(0.95 * kFs / 2)));
      p.q = std::exp(rng.uniform(std::log(0.3), std::log(10.0)));
      p.gain_db = rng.uniform(-24.0, 24.0);
      const auto s = dsp::biquad_coefficients(p);
      Tape<double> t;
      t.set_grad_enabled(false);
      const V y = dsp::apply_filter(t.constant(Tensor<double>::vector(x)),
                                    t.constant(Tensor<double>({1, 6}, {s.b0, s.b1, s.b2, s.a0, s.a1, s.a2})), n);
      const double err = test::rel_l2(recursion(x, s), y.value().storage());
      if (err > worst) {
        worst = err;
        worst_kind = fmt::format("{} f0={:.0f} Q={:.2f} g={:.1f}", dsp::filter_kind_name(kind), p.f0, p.q, p.gain_db);
      }
    }
  }
  return {worst < 1e-3, fmt::format("100 filters, worst rel L2 {:.2e} ({}), limit 1e-3", worst, worst_kind)};
}

// --- 3: identity ladder -------------------------------------------------------------

Outcome identity_ladder() {
  const auto x = test::uniform(4096, 31);
  std::vector<std::pair<std::string, double>> rows;
  auto processor_identity = [&](const std::string& kind, const std::vector<double>& physical_or_nan) {
    auto p = processor(kind);
    std::vector<double> u;
    for (std::size_t i = 0; i < p->num_params(); ++i) {
      const double v = physical_or_nan[i];
      u.push_back(std::isnan(v) ? 0.37 + 0.05 * static_cast<double>(i) : dsp::normalize(v, p->params()[i].range));
    }
    rows.emplace_back(kind, test::rel_l2(x, run_processor(*p, x, u)));
  };
  const double any = std::nan("");
  processor_identity("gain", {0.0});
  processor_identity("dc_offset", {0.0});
  processor_identity("peak", {0.0, any, any});
  processor_identity("lowshelf", {0.0, any, any});
  processor_identity("highshelf", {0.0, any, any});

  Rng rng(5);
  const Tensor<double> h = test::random_tensor({16, 512}, 32);
  const Tensor<double> c = Tensor<double>::vector({0.2, 0.7});
  auto compare = [&](const std::string& name, const V& y, const V& ref) {
    rows.emplace_back(name, test::rel_l2(ref.value().storage(), y.value().storage()));
  };
  {
    Tape<double> t;
    t.set_grad_enabled(false);
    const V hv = t.constant(h), cv = t.constant(c);
    cond::FilmGenerator<double> gen("gen", 2, 16, 32, rng);
    cond::FilmHead<double> head("head", 32, 16, true, rng);
    const auto [gamma, beta] = head(gen(cv));
    compare("film", cond::film_apply(hv, gamma, beta), hv);
    cond::TFilm<double> tf("tf", 16, 2, 128, true, rng);
    compare("tfilm", tf(hv, cv, nullptr), hv);
    cond::TTFilm<double> tt("tt", 16, 2, 128, 8, 32, true, rng);
    compare("ttfilm", tt(hv, cv, nullptr), hv);
    cond::TVFilmController<double> tv("tv", 2, 32, 128, rng);
    cond::FilmHead<double> tv_head("tvh", 32, 16, true, rng);
    compare("tvfilm", cond::tvfilm_modulate(hv, tv_head, tv(t.constant(test::random_tensor({1, 512}, 33)), cv, nullptr), 128),
            hv);
  }
  double worst = 0.0;
  std::string detail;
  for (const auto& [name, err] : rows) {
    worst = std::max(worst, err);
    detail += fmt::format("{} {:.1e}, ", name, err);
  }
  detail += "limit 1e-6";
  return {worst <= 1e-6, detail};
}

// --- 4: receptive field and parameter counts ------------------------------------------

Outcome receptive_field_and_counts() {
  auto tcn = [](cond::CondKind kind) {
    model::ModelSpec s;
    s.arch = model::Arch::kTcn;
    s.num_controls = 2;
    s.conv.cond = kind;
    return model::build_model<float>(s);
  };
  const std::size_t rf = model::receptive_field(5, 7, 4);
  const auto film = tcn(cond::CondKind::kFilm);
  const std::size_t f = film->param_count();
  const std::size_t tf = tcn(cond::CondKind::kTFilm)->param_count();
  const std::size_t ttf = tcn(cond::CondKind::kTTFilm)->param_count();
  const std::size_t tvf = tcn(cond::CondKind::kTVFilm)->param_count();
  auto within = [](std::size_t n, double ref) { return std::abs(static_cast<double>(n) / ref - 1.0) <= 0.15; };
  const bool counts = within(f, 15000) && within(tf, 42000) && within(ttf, 17300) && within(tvf, 17700);
  const bool order = f < ttf && f < tvf && f < tf && ttf < tf && tvf < tf;
  const bool pass = rf == 2047 && film->receptive_field() == 2047 && counts && order;
  return {pass, fmt::format("receptive field {} (model {}), params F {} / TF {} / TTF {} / TVF {} vs 15.0k/42.0k/17.3k/17.7k "
                            "+-15%, ordering {}",
                            rf, film->receptive_field(), f, tf, ttf, tvf, order ? "holds" : "violated")};
}

// --- 5: table additivity ------------------------------------------------------------

Outcome table_additivity() {
  model::ModelSpec spec;
  spec.arch = model::Arch::kTcn;
  spec.num_controls = 1;
  spec.conv = {.blocks = 2, .kernel = 3, .dilation_growth = 2, .channels = 4, .cond = cond::CondKind::kFilm};
  auto m = model::build_model<double>(spec);
  std::vector<data::Segment> segs;
  for (int i = 0; i < 4; ++i) {
    data::Segment s;
    s.x = test::uniform(4096, 40 + i, -0.5, 0.5);
    for (double v : s.x) s.y.push_back(std::tanh(3 * v));
    s.controls = {0.25 * i};
    segs.push_back(std::move(s));
  }
  train::TrainConfig cfg;
  std::vector<loss::Metrics> rows;
  const auto mean = train::evaluate(*m, segs, cfg, &rows);
  rows.push_back(mean);
  const fs::path table = fs::temp_directory_path() / "deffx_acceptance_table.csv";
  std::vector<train::TableRow> table_rows;
  for (std::size_t i = 0; i < rows.size(); ++i) table_rows.push_back({fmt::format("row{}", i), rows[i]});
  train::write_metrics_table(table, table_rows);
  double worst = 0.0;
  std::ifstream in(table);
  std::string line;
  std::getline(in, line);
  const bool header = line == "model,tot,l1,mrstft";
  std::size_t parsed = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string name, a, b, c;
    std::getline(ss, name, ',');
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    std::getline(ss, c, ',');
    worst = std::max(worst, std::abs(std::stod(a) - (std::stod(b) + std::stod(c))));
    ++parsed;
  }
  for (const auto& r : rows) worst = std::max(worst, std::abs(r.tot - (r.l1 + r.mrstft)));
  fs::remove(table);
  return {header && parsed == rows.size() && worst <= 1e-9,
          fmt::format("{} table rows, max |Tot - (L1 + MR-STFT)| = {:.1e}, limit 1e-9", parsed, worst)};
}

// --- 6: gray-box system identification --------------------------------------------------

Outcome graybox_identification() {
  const std::size_t n = static_cast<std::size_t>(60 * kFs);
  const auto x = excitation(n, kFs, 0.25, 60);
  const auto lp = dsp::biquad_coefficients({dsp::FilterKind::kLowpass, 2000.0, 0.0, std::sqrt(0.5), kFs});
  auto y = recursion(x, lp);
  for (double& v : y) v = std::tanh(4 * v);

  data::Splits splits;
  split_into(splits, x, y, 4096, {});
  model::ModelSpec spec;
  spec.arch = model::Arch::kGrayBox;
  spec.seed = 6;
  spec.graybox.stages = model::parse_chain("PEQ.s > G.s > O.s > RNL > G.s > PEQ.s");
  auto m = model::build_model<float>(spec);

  train::TrainConfig cfg;
  cfg.max_steps = 1500;
  cfg.batch_size = 4;
  cfg.adam.lr = 1e-2;
  cfg.lr_decay = 0.5;
  cfg.decay_every = 500;
  cfg.val_every = 250;
  cfg.seed = 6;
  const fs::path dir = fs::temp_directory_path() / "deffx_acceptance_c6";
  fs::remove_all(dir);
  fs::create_directories(dir);
  train::Trainer<float> trainer(*m, cfg, splits, dir);
  log_progress(trainer, "c6");
  trainer.run();
  model::restore(*m, model::load_checkpoint(dir / "best.ckpt"));
  const auto metrics = train::evaluate(*m, splits.test, cfg);
  fs::remove_all(dir);
  return {metrics.esr < 0.01, fmt::format("{} steps, test ESR {:.5f} over {} segments, limit 0.01", trainer.step(),
                                          metrics.esr, splits.test.size())};
}

// --- 7: parametric conditioning --------------------------------------------------------

std::vector<double> drive(const std::vector<double>& x, double c) {
  const double g = std::pow(10.0, 24.0 * c / 20.0);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(g * x[i]);
  return y;
}

Outcome parametric_conditioning() {
  const std::vector<double> settings = {0.0, 0.2, 0.4, 0.6, 1.0};
  const std::size_t n = static_cast<std::size_t>(12 * kFs), length = 4096;
  data::Splits splits;
  std::vector<std::vector<data::Segment>> test_by_setting;
  for (std::size_t k = 0; k < settings.size(); ++k) {
    const auto x = excitation(n, kFs, 0.2, 70 + k);
    data::Splits one;
    split_into(one, x, drive(x, settings[k]), length, {settings[k]});
    for (auto& s : one.train) splits.train.push_back(std::move(s));
    for (auto& s : one.val) splits.val.push_back(std::move(s));
    test_by_setting.push_back(one.test);
    for (auto& s : one.test) splits.test.push_back(std::move(s));
  }
  const auto xi = excitation(static_cast<std::size_t>(2 * kFs), kFs, 0.2, 90);
  const auto interpolated = cut(xi, drive(xi, 0.5), 0, xi.size(), length, {0.5});

  model::ModelSpec spec;
  spec.arch = model::Arch::kTcn;
  spec.num_controls = 1;
  spec.seed = 7;
  spec.conv.cond = cond::CondKind::kFilm;  // TCN-F-45-S-16: 5 blocks, kernel 7, growth 4, 16 channels
  auto m = model::build_model<float>(spec);

  train::TrainConfig cfg;
  cfg.max_steps = 5000;
  cfg.batch_size = 4;
  cfg.adam.lr = 3e-3;
  cfg.lr_decay = 0.5;
  cfg.decay_every = 1500;
  cfg.val_every = 250;
  cfg.seed = 7;
  const fs::path dir = fs::temp_directory_path() / "deffx_acceptance_c7";
  fs::remove_all(dir);
  fs::create_directories(dir);
  train::Trainer<float> trainer(*m, cfg, splits, dir);
  log_progress(trainer, "c7");
  trainer.run();
  model::restore(*m, model::load_checkpoint(dir / "best.ckpt"));
  fs::remove_all(dir);

  double mean = 0.0;
  std::string per;
  for (std::size_t k = 0; k < settings.size(); ++k) {
    const double e = train::evaluate(*m, test_by_setting[k], cfg).esr;
    mean += e / static_cast<double>(settings.size());
    per += fmt::format("{:.4f}{}", e, k + 1 < settings.size() ? "/" : "");
  }
  const double mid = train::evaluate(*m, interpolated, cfg).esr;
  return {mean < 0.05 && mid < 0.1, fmt::format("{} steps, ESR per setting {} mean {:.4f} (limit 0.05), c=0.5 "
                                                "{:.4f} (limit 0.1)",
                                                trainer.step(), per, mean, mid)};
}

// --- 8: TBPTT equivalence ---------------------------------------------------------------

double tbptt_gap(const std::function<std::unique_ptr<model::Model<double>>()>& make, const data::Segment& seq) {
  train::TrainConfig cfg;
  cfg.mrstft.resolutions = {{64, 16, 64}, {128, 32, 128}};
  cfg.tbptt = {.enabled = true, .chunk_len = seq.x.size(), .warmup_len = 0};
  auto a = make(), b = make();
  train::Adam<double> adam_a(a->parameters(), cfg.adam), adam_b(b->parameters(), cfg.adam);
  const auto plain = train::train_step(*a, adam_a, std::span<const data::Segment>(&seq, 1), cfg);
  const auto chunked = train::tbptt_train_step(*b, adam_b, seq, cfg);
  if (chunked.chunks.size() != 1) return INFINITY;
  return std::abs(chunked.chunks[0].tot - plain.tot);
}

Outcome tbptt_equivalence() {
  data::Segment seq;
  seq.x = test::uniform(512, 80, -0.5, 0.5);
  for (double v : seq.x) seq.y.push_back(std::tanh(2 * v));
  seq.controls = {0.4};
  const double lstm = tbptt_gap(
      [] {
        model::ModelSpec s;
        s.arch = model::Arch::kLstm;
        s.num_controls = 1;
        s.lstm = {.hidden = 8, .cond = cond::CondKind::kConcat};
        return model::build_model<double>(s);
      },
      seq);
  const double gb = tbptt_gap(
      [] {
        model::ModelSpec s;
        s.arch = model::Arch::kGrayBox;
        s.num_controls = 1;
        s.graybox.stages = model::parse_chain("G.dc > RNL > PK.d");
        s.graybox.block_size = 64;
        return model::build_model<double>(s);
      },
      seq);
  return {lstm <= 1e-6 && gb <= 1e-6,
          fmt::format("|loss difference| LSTM {:.1e}, gray-box with dynamic controllers {:.1e}, limit 1e-6", lstm, gb)};
}

// --- 9: response analyzer ------------------------------------------------------------

Outcome response_analyzer() {
  model::ModelSpec spec;
  spec.arch = model::Arch::kGrayBox;
  spec.graybox.stages = model::parse_chain("G.s > LP.s");
  auto m = model::build_model<double>(spec);
  auto& gb = dynamic_cast<model::GrayBoxModel<double>&>(*m);
  gb.set_static_physical(0, {-6.02});
  gb.set_static_physical(1, {1000.0, 0.707});
  analysis::SweepConfig sweep;  // 50 steps, T = 5 s, 10 Hz to 0.45 fs at 48 kHz
  const auto measured = analysis::stepped_sine_response(*m, sweep, {});

  // Independent oracle: cookbook lowpass evaluated on the unit circle.
  const double w0 = 2 * std::numbers::pi * 1000.0 / kFs, alpha = std::sin(w0) / (2 * 0.707);
  const double b0 = (1 - std::cos(w0)) / 2, b1 = 1 - std::cos(w0), b2 = b0;
  const double a0 = 1 + alpha, a1 = -2 * std::cos(w0), a2 = 1 - alpha;
  const double g = std::pow(10.0, -6.02 / 20.0);
  double worst_mag = 0.0, worst_phase = 0.0, prev = 0.0, offset = 0.0;
  for (std::size_t i = 0; i < measured.freqs.size(); ++i) {
    const std::complex<double> z = std::polar(1.0, -2 * std::numbers::pi * measured.freqs[i] / kFs);
    const std::complex<double> h = g * (b0 + b1 * z + b2 * z * z) / (a0 + a1 * z + a2 * z * z);
    double phase = std::arg(h) + offset;
    if (i > 0) {
      while (phase - prev > std::numbers::pi) phase -= 2 * std::numbers::pi, offset -= 2 * std::numbers::pi;
      while (phase - prev < -std::numbers::pi) phase += 2 * std::numbers::pi, offset += 2 * std::numbers::pi;
    }
    prev = phase;
    worst_mag = std::max(worst_mag, std::abs(measured.magnitude_db[i] - 20 * std::log10(std::abs(h))));
    worst_phase = std::max(worst_phase, std::abs(measured.phase_rad[i] - phase));
  }
  const std::size_t tail = analysis::tail_length(5.0, 48000.0, 10.0);
  const bool pass = measured.freqs.size() == 50 && worst_mag <= 0.05 && worst_phase <= 0.02 && tail == 24000;
  return {pass, fmt::format("{} points, max |dB error| {:.2e} (limit 0.05), max |phase error| {:.2e} rad (limit 0.02), "
                            "tail {} samples (expected 24000)",
                            measured.freqs.size(), worst_mag, worst_phase, tail)};
}

// --- 10: pre-fit nonlinearities ------------------------------------------------------

Outcome prefit_nonlinearities() {
  std::string detail;
  bool pass = true;
  for (const char* kind : {"rational", "siren"}) {
    const auto& fit = dsp::tanh_prefit(kind);
    Rng rng(0);
    auto p = dsp::make_processor<double>({.kind = std::string(kind) == "rational" ? "static_rational" : "static_mlp"}, kFs,
                                         rng, kind);
    const auto y = run_processor(*p, fit.oracle_x, {});
    double dev_tanh = 0.0, dev_oracle = 0.0, lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < y.size(); ++i) {
      dev_tanh = std::max(dev_tanh, std::abs(y[i] - std::tanh(fit.oracle_x[i])));
      dev_oracle = std::max(dev_oracle, std::abs(y[i] - fit.oracle_y[i]));
      lo = std::min(lo, fit.oracle_x[i]);
      hi = std::max(hi, fit.oracle_x[i]);
    }
    const double limit = std::string(kind) == "rational" ? 1e-3 : 5e-3;
    pass = pass && dev_tanh <= limit && dev_oracle <= 1e-9 && lo <= -3.0 && hi >= 3.0 && y.size() == fit.oracle_y.size();
    detail += fmt::format("{}: max |f - tanh| {:.2e} (limit {:.0e}), vs committed oracle {:.1e}; ", kind, dev_tanh, limit,
                          dev_oracle);
  }
  detail += "grid [-3, 3]";
  return {pass, detail};
}

// --- 11: determinism and resume -------------------------------------------------------

Outcome determinism_and_resume() {
  data::Splits splits;
  const auto x = excitation(static_cast<std::size_t>(2 * kFs), kFs, 0.3, 100);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(2.5 * x[i]);
  split_into(splits, x, y, 2048, {});
  auto make = [] {
    model::ModelSpec s;
    s.arch = model::Arch::kGrayBox;
    s.seed = 11;
    s.graybox.stages = model::parse_chain("PEQ.s > G.s > RNL > G.s");
    return model::build_model<double>(s);
  };
  train::TrainConfig cfg;
  cfg.max_steps = 30;
  cfg.val_every = 10;
  cfg.seed = 11;
  auto m1 = make(), m2 = make();
  train::Trainer<double> t1(*m1, cfg, splits), t2(*m2, cfg, splits);
  t1.run();
  t2.run();
  bool same = t1.log().rows.size() == t2.log().rows.size();
  for (std::size_t i = 0; same && i < t1.log().rows.size(); ++i) same = t1.log().rows[i].same_values(t2.log().rows[i]);

  const fs::path ckpt = fs::temp_directory_path() / "deffx_acceptance_resume.ckpt";
  auto m3 = make();
  train::Trainer<double> t3(*m3, cfg, splits);
  t3.run(12);
  model::save_checkpoint(ckpt, t3.checkpoint());
  auto m4 = make();
  train::Trainer<double> t4(*m4, cfg, splits);
  t4.resume(model::load_checkpoint(ckpt));
  t4.run();
  fs::remove(ckpt);
  std::vector<const train::LogRow*> full, resumed;
  for (const auto& r : t1.log().rows)
    if (r.phase == "train" && r.step > 12) full.push_back(&r);
  for (const auto& r : t4.log().rows)
    if (r.phase == "train") resumed.push_back(&r);
  double gap = full.size() == resumed.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(full.size(), resumed.size()); ++i) {
    if (full[i]->step != resumed[i]->step) gap = INFINITY;
    gap = std::max(gap, std::abs(full[i]->tot - resumed[i]->tot));
  }
  const bool pass = same && resumed.size() >= 10 && gap <= 1e-6;
  return {pass, fmt::format("rerun RunLog {} ({} rows), {} steps after resume, max |loss difference| {:.1e} (limit 1e-6)",
                            same ? "identical" : "differs", t1.log().rows.size(), resumed.size(), gap)};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "gradient suite", gradient_suite},
    {2, "filter oracle", filter_oracle},
    {3, "identity ladder", identity_ladder},
    {4, "receptive field and parameter counts", receptive_field_and_counts},
    {5, "metrics table additivity", table_additivity},
    {6, "gray-box system identification", graybox_identification},
    {7, "parametric conditioning", parametric_conditioning},
    {8, "TBPTT equivalence", tbptt_equivalence},
    {9, "response analyzer", response_analyzer},
    {10, "pre-fit nonlinearities", prefit_nonlinearities},
    {11, "determinism and resume", determinism_and_resume},
};

}  // namespace
}  // namespace deffx::acceptance

int main(int argc, char** argv) {
  using namespace deffx::acceptance;
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  app.add_option("--only", only, "Run a single criterion")->check(CLI::Range(1, 11));
  CLI11_PARSE(app, argc, argv);
  spdlog::set_default_logger(spdlog::stderr_color_mt("acceptance"));

  bool all_pass = true;
  for (const auto& c : kCriteria) {
    if (only && c.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    fmt::print("criterion {:>2} {:<38} {}  {} [{:.1f} s]\n", c.id, c.name, out.pass ? "PASS" : "FAIL", out.detail, secs);
    std::fflush(stdout);
    all_pass = all_pass && out.pass;
  }
  return all_pass ? 0 : 1;
}
