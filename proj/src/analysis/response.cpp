#include "deffx/analysis/response.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "deffx/core/error.hpp"

namespace deffx::analysis {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> sinusoid(double f, double fs, double amplitude, std::size_t length) {
  std::vector<double> x(length);
  for (std::size_t n = 0; n < length; ++n) x[n] = amplitude * std::sin(kTwoPi * f * static_cast<double>(n) / fs);
  return x;
}

template <typename T>
Tensor<T> signal_tensor(const std::vector<double>& x) {
  return Tensor<T>({1, x.size()}, std::vector<T>(x.begin(), x.end()));
}

template <typename T>
std::vector<double> to_double(const Tensor<T>& t) {
  return {t.storage().begin(), t.storage().end()};
}

template <typename T>
void check_stage(model::GrayBoxModel<T>& model, std::size_t stage) {
  if (stage >= model.num_stages())
    throw InvalidArgument("stage " + std::to_string(stage) + " out of range (" + std::to_string(model.num_stages()) +
                          " stages)");
}

template <typename T>
std::vector<model::StageTrace<T>> trace_stages(Tape<T>& tape, model::GrayBoxModel<T>& model,
                                               const std::vector<double>& x, const std::vector<double>& controls,
                                               std::type_identity_t<Var<T>>* output) {
  tape.set_grad_enabled(false);
  const Var<T> c = controls.empty() ? Var<T>{}
                                    : tape.constant(Tensor<T>::vector(std::vector<T>(controls.begin(), controls.end())));
  std::vector<model::StageTrace<T>> trace;
  const Var<T> y = model.forward_traced(tape.constant(signal_tensor<T>(x)), c, nullptr, &trace);
  if (output) *output = y;
  return trace;
}

}  // namespace

std::size_t tail_length(double duration, double fs, double f1) {
  if (!(duration > 0.0) || !(fs > 0.0) || !(f1 > 0.0)) throw InvalidArgument("tail length needs positive T, fs, f1");
  return static_cast<std::size_t>(std::llround(duration * std::floor(fs / f1)));
}

void SweepConfig::validate() const {
  if (!(fs > 0.0)) throw InvalidArgument("sweep sample rate must be positive");
  if (!(f1 > 0.0 && f1 < upper() && upper() < fs / 2.0))
    throw InvalidArgument("sweep needs 0 < f1 < f2 < fs/2, got f1=" + std::to_string(f1) +
                          " f2=" + std::to_string(upper()));
  if (steps < 2) throw InvalidArgument("sweep needs at least 2 steps");
  if (!(amplitude > 0.0)) throw InvalidArgument("sweep amplitude must be positive");
  if (!(warmup >= 0.0)) throw InvalidArgument("sweep warm-up must be nonnegative");
  if (tail_length() < static_cast<std::size_t>(std::floor(fs / f1)))
    throw InvalidArgument("tail of " + std::to_string(tail_length()) + " samples holds less than one period of f1");
  if (signal_length() < 2 * tail_length())
    throw InvalidArgument("tail of " + std::to_string(tail_length()) + " samples is longer than half the rendered " +
                          std::to_string(signal_length()) + " samples");
}

std::vector<double> SweepConfig::frequencies() const {
  std::vector<double> f(steps);
  const double ratio = upper() / f1;
  for (std::size_t i = 0; i < steps; ++i)
    f[i] = f1 * std::pow(ratio, static_cast<double>(i) / static_cast<double>(steps - 1));
  return f;
}

std::size_t SweepConfig::signal_length() const { return static_cast<std::size_t>(std::llround(duration * fs)); }

std::size_t SweepConfig::tail_length() const { return analysis::tail_length(duration, fs, f1); }

std::complex<double> project(std::span<const double> x, double f, double fs) {
  const double period = fs / f;
  const auto periods = static_cast<std::size_t>(std::floor(static_cast<double>(x.size()) / period));
  if (periods == 0) throw InvalidArgument("segment shorter than one period of " + std::to_string(f) + " Hz");
  const auto n = std::min(x.size(), static_cast<std::size_t>(std::llround(static_cast<double>(periods) * period)));
  const std::size_t start = x.size() - n;
  std::complex<double> acc;
  for (std::size_t t = 0; t < n; ++t)
    acc += x[start + t] * std::polar(1.0, -kTwoPi * f * static_cast<double>(start + t) / fs);
  return acc;
}

void unwrap(std::vector<double>& phase) {
  for (std::size_t i = 1; i < phase.size(); ++i) {
    const double d = phase[i] - phase[i - 1];
    phase[i] -= kTwoPi * std::round(d / kTwoPi);
  }
}

ResponseCurve stepped_sine_response(const System& system, const SweepConfig& cfg, bool warmup) {
  cfg.validate();
  const std::size_t tail = cfg.tail_length();
  const std::size_t pre = warmup ? static_cast<std::size_t>(std::llround(cfg.warmup * cfg.fs)) : 0;
  const std::size_t length = pre + cfg.signal_length();
  ResponseCurve curve;
  curve.freqs = cfg.frequencies();
  for (double f : curve.freqs) {
    const std::vector<double> x = sinusoid(f, cfg.fs, cfg.amplitude, length);
    const std::vector<double> y = system(x);
    if (y.size() != x.size()) throw InvalidArgument("system changed the signal length");
    const std::span<const double> xs(x), ys(y);
    const std::complex<double> h = project(ys.last(tail), f, cfg.fs) / project(xs.last(tail), f, cfg.fs);
    curve.magnitude_db.push_back(20.0 * std::log10(std::abs(h)));
    curve.phase_rad.push_back(std::arg(h));
  }
  unwrap(curve.phase_rad);
  return curve;
}

template <typename T>
System model_system(model::Model<T>& model, const std::vector<double>& controls) {
  if (controls.size() != model.spec().num_controls)
    throw InvalidArgument("model takes " + std::to_string(model.spec().num_controls) + " controls, got " +
                          std::to_string(controls.size()));
  return [&model, controls](const std::vector<double>& x) {
    Tape<T> tape;
    tape.set_grad_enabled(false);
    const Var<T> c = controls.empty()
                         ? Var<T>{}
                         : tape.constant(Tensor<T>::vector(std::vector<T>(controls.begin(), controls.end())));
    return to_double(model.forward(tape.constant(signal_tensor<T>(x)), c, nullptr, false).value());
  };
}

template <typename T>
ResponseCurve stepped_sine_response(model::Model<T>& model, const SweepConfig& cfg,
                                    const std::vector<double>& controls) {
  return stepped_sine_response(model_system(model, controls), cfg, model.recurrent());
}

ResponseCurve analytic_response(const std::vector<dsp::BiquadSection>& sections, const std::vector<double>& freqs,
                                double fs) {
  ResponseCurve curve;
  curve.freqs = freqs;
  for (const auto& h : dsp::frequency_response(sections, freqs, fs)) {
    curve.magnitude_db.push_back(20.0 * std::log10(std::abs(h)));
    curve.phase_rad.push_back(std::arg(h));
  }
  unwrap(curve.phase_rad);
  return curve;
}

AmplitudeCurve amplitude_response(const System& f, std::size_t n) {
  if (n < 2) throw InvalidArgument("amplitude response needs at least 2 points");
  AmplitudeCurve curve;
  for (std::size_t i = 0; i < n; ++i) curve.x.push_back(-1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1));
  curve.y = f(curve.x);
  if (curve.y.size() != n) throw InvalidArgument("nonlinearity changed the signal length");
  for (double v : curve.x) curve.reference.push_back(std::tanh(v));
  return curve;
}

template <typename T>
System processor_system(const dsp::Processor<T>& processor) {
  if (processor.num_params() != 0)
    throw InvalidArgument("processor " + std::string(processor.kind()) + " needs controls to run standalone");
  return [&processor](const std::vector<double>& x) {
    Tape<T> tape;
    tape.set_grad_enabled(false);
    return to_double(processor.process(tape.constant(signal_tensor<T>(x)), nullptr).value());
  };
}

template <typename T>
TimeTrace time_trace(model::GrayBoxModel<T>& model, std::size_t stage, const std::vector<double>& x,
                     const std::vector<double>& controls) {
  check_stage(model, stage);
  Tape<T> tape;
  Var<T> y;
  const auto trace = trace_stages(tape, model, x, controls, &y);
  const auto& st = trace[stage];
  if (!st.controls.values.valid() || !st.controls.dynamic())
    throw InvalidArgument("stage " + std::to_string(stage) + " (" + st.processor +
                          ") has no time-varying parameters; report its static values instead");
  const auto& proc = model.processor(stage);
  TimeTrace out;
  out.fs = model.spec().sample_rate;
  out.input = x;
  out.output = to_double(st.output.value());
  for (std::size_t i = 0; i < proc.num_params(); ++i) {
    out.names.push_back(proc.params()[i].name);
    const Var<T> held = dsp::hold_blocks(proc.physical(st.controls, i), st.controls.block_size, x.size());
    out.values.push_back(to_double(held.value()));
  }
  return out;
}

template <typename T>
std::vector<std::pair<std::string, double>> stage_parameters(model::GrayBoxModel<T>& model, std::size_t stage,
                                                             const std::vector<double>& controls) {
  check_stage(model, stage);
  const std::size_t length = std::max<std::size_t>(model.spec().graybox.block_size, 1);
  Tape<T> tape;
  const auto trace = trace_stages(tape, model, std::vector<double>(length, 0.0), controls, nullptr);
  const auto& st = trace[stage];
  std::vector<std::pair<std::string, double>> out;
  if (!st.controls.values.valid()) return out;
  if (st.controls.dynamic())
    throw InvalidArgument("stage " + std::to_string(stage) + " (" + st.processor +
                          ") is time-varying; use a time trace");
  const auto& proc = model.processor(stage);
  for (std::size_t i = 0; i < proc.num_params(); ++i)
    out.emplace_back(proc.params()[i].name, static_cast<double>(proc.physical(st.controls, i).value()[0]));
  return out;
}

template <typename T>
System stage_system(model::GrayBoxModel<T>& model, std::size_t stage, const std::vector<double>& controls) {
  check_stage(model, stage);
  return [&model, stage, controls](const std::vector<double>& x) {
    // Static controls do not depend on the audio, so a short probe suffices.
    Tape<T> tape;
    const std::size_t probe = std::max<std::size_t>(model.spec().graybox.block_size, 1);
    const auto trace = trace_stages(tape, model, std::vector<double>(probe, 0.0), controls, nullptr);
    const auto& st = trace[stage];
    if (st.controls.values.valid() && st.controls.dynamic())
      throw InvalidArgument("stage " + std::to_string(stage) + " (" + st.processor + ") is time-varying");
    const auto& proc = model.processor(stage);
    const Var<T> in = tape.constant(signal_tensor<T>(x));
    return to_double(proc.process(in, st.controls.values.valid() ? &st.controls : nullptr).value());
  };
}

#define DEFFX_ANALYSIS(T)                                                                                         \
  template System model_system(model::Model<T>&, const std::vector<double>&);                                     \
  template ResponseCurve stepped_sine_response(model::Model<T>&, const SweepConfig&, const std::vector<double>&); \
  template System processor_system(const dsp::Processor<T>&);                                                     \
  template System stage_system(model::GrayBoxModel<T>&, std::size_t, const std::vector<double>&);              \
  template TimeTrace time_trace(model::GrayBoxModel<T>&, std::size_t, const std::vector<double>&,                 \
                                const std::vector<double>&);                                                      \
  template std::vector<std::pair<std::string, double>> stage_parameters(model::GrayBoxModel<T>&, std::size_t,     \
                                                                        const std::vector<double>&);
DEFFX_ANALYSIS(float)
DEFFX_ANALYSIS(double)

}  // namespace deffx::analysis
