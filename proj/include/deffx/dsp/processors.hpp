#pragma once

// Differentiable gray-box processors. Each processor maps a [1, L] signal to a
// [1, L] signal given normalized control parameters produced by a controller.

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "deffx/dsp/biquad.hpp"
#include "deffx/dsp/params.hpp"
#include "deffx/nn/layers.hpp"

namespace deffx::dsp {

// Normalized control values for one stage: [P] when static, [blocks, P] when
// produced per block of `block_size` samples.
template <typename T>
struct Controls {
  Var<T> values;
  std::size_t block_size = 0;

  bool dynamic() const { return block_size > 0; }
};

template <typename T>
class Processor {
 public:
  virtual ~Processor() = default;

  virtual std::string_view kind() const = 0;
  const std::vector<ParamSpec>& params() const { return specs_; }
  std::size_t num_params() const { return specs_.size(); }

  // `g` may be null only for processors without control parameters.
  virtual Var<T> process(const Var<T>& x, const Controls<T>* g) const = 0;
  // Trainable weights owned by the processor itself (MLP, rational, FIR).
  virtual void collect(nn::ParamRefs<T>&) {}
  // Biquad cascade for the given physical parameter values; empty for
  // processors that are not filters.
  virtual std::vector<BiquadSection> sections(const std::vector<double>& physical) const;
  virtual bool memoryless() const { return false; }

  // Physical value of parameter `index` as [1] (static) or [blocks] (dynamic).
  Var<T> physical(const Controls<T>& g, std::size_t index) const;

 protected:
  std::vector<ParamSpec> specs_;
};

struct ProcessorConfig {
  std::string kind;
  std::map<std::string, ParamRange> ranges;  // overrides keyed by ParamSpec::name
  std::size_t fir_taps = 64;
  std::size_t siren_hidden = 32;
  std::size_t siren_layers = 2;
  bool tanh_init = true;  // static_mlp / static_rational start from the tanh fit
};

// Known kinds: phase_inversion, gain, dc_offset, lowpass, highpass, lowshelf,
// highshelf, peak, parametric_eq, shelving_eq, static_fir, tanh, static_mlp,
// static_rational. Throws InvalidArgument for anything else.
template <typename T>
std::unique_ptr<Processor<T>> make_processor(const ProcessorConfig& cfg, double fs, Rng& rng,
                                             const std::string& name);

std::vector<std::string> processor_kinds();

template <typename T>
Var<T> phase_inversion(const Var<T>& x);
// gain_db and offset are [1] or per-sample [1, L]-broadcastable tensors.
template <typename T>
Var<T> apply_gain(const Var<T>& x, const Var<T>& gain_db);
template <typename T>
Var<T> apply_offset(const Var<T>& x, const Var<T>& offset);

// Per-block values [blocks] held for block_size samples: [1, length].
template <typename T>
Var<T> hold_blocks(const Var<T>& values, std::size_t block_size, std::size_t length);

// y[n] = sum_i taps[i] x[n - i] for x [1, L], taps [N+1].
template <typename T>
Var<T> fir_filter(const Var<T>& x, const Var<T>& taps);

// R(x) = (a0 + ... + a6 x^6) / (1 + b1 x + ... + b5 x^5) with x clamped to
// [-8, 8]. numerator [7], denominator [5].
template <typename T>
Var<T> rational(const Var<T>& x, const Var<T>& numerator, const Var<T>& denominator);

template <typename T>
class StaticFir : public Processor<T> {
 public:
  StaticFir(const std::string& name, std::size_t taps, std::size_t hidden, std::size_t layers, Rng& rng);
  std::string_view kind() const override { return "static_fir"; }
  Var<T> process(const Var<T>& x, const Controls<T>* g) const override;
  void collect(nn::ParamRefs<T>& out) override { net_.collect(out); }
  // Impulse response b_0..b_N on the tape of `like`.
  Var<T> taps(Tape<T>& tape) const;
  nn::Siren<T>& net() { return net_; }

 private:
  nn::Siren<T> net_;
  std::size_t taps_;
};

template <typename T>
class StaticMlp : public Processor<T> {
 public:
  StaticMlp(const std::string& name, std::size_t hidden, std::size_t layers, bool tanh_init, Rng& rng);
  std::string_view kind() const override { return "static_mlp"; }
  Var<T> process(const Var<T>& x, const Controls<T>* g) const override;
  void collect(nn::ParamRefs<T>& out) override { net_.collect(out); }
  bool memoryless() const override { return true; }
  nn::Siren<T>& net() { return net_; }

 private:
  nn::Siren<T> net_;
};

template <typename T>
class StaticRational : public Processor<T> {
 public:
  StaticRational(const std::string& name, bool tanh_init);
  std::string_view kind() const override { return "static_rational"; }
  Var<T> process(const Var<T>& x, const Controls<T>* g) const override;
  void collect(nn::ParamRefs<T>& out) override;
  bool memoryless() const override { return true; }

  Parameter<T> numerator;    // a0..a6
  Parameter<T> denominator;  // b1..b5
};

}  // namespace deffx::dsp
