#pragma once

// Trainable building blocks. Layers own their Parameters and bind them to the
// tape of their input on every call, so a layer can be reused across tapes.
//
// Feature layout is [features, N]: column n is one time step or one example.

#include <cstddef>
#include <string>
#include <vector>

#include "deffx/autodiff/ops.hpp"
#include "deffx/core/rng.hpp"

namespace deffx::nn {

template <typename T>
using ParamRefs = std::vector<Parameter<T>*>;

template <typename T>
std::size_t count_parameters(const ParamRefs<T>& params);

// Weights uniform in +-bound.
template <typename T>
Parameter<T> uniform_parameter(std::string name, Shape shape, double bound, Rng& rng);

enum class Activation { kNone, kTanh, kSigmoid, kSine };

template <typename T>
Var<T> activate(const Var<T>& x, Activation act, T omega = T(1));

template <typename T>
class Linear {
 public:
  Linear() = default;
  // Weights and bias uniform in +-sqrt(1/in).
  Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng, bool bias = true);

  // [in, N] -> [out, N]
  Var<T> operator()(const Var<T>& x) const;
  void collect(ParamRefs<T>& out);

  std::size_t in_features() const { return weight.value.dim(1); }
  std::size_t out_features() const { return weight.value.dim(0); }

  Parameter<T> weight;  // [out, in]
  Parameter<T> bias;    // [out, 1]
  bool has_bias = true;
};

// Stack of Linear layers with one activation between layers and another
// after the last.
template <typename T>
class Mlp {
 public:
  Mlp() = default;
  // sizes = {in, hidden..., out}
  Mlp(const std::string& name, const std::vector<std::size_t>& sizes, Activation hidden, Activation output, Rng& rng);

  Var<T> operator()(const Var<T>& x) const;
  void collect(ParamRefs<T>& out);

  std::vector<Linear<T>> layers;
  Activation hidden_act = Activation::kTanh;
  Activation output_act = Activation::kNone;
};

// Sinusoidal-activation network: sin(w0 * (W x + b)) on hidden layers, linear
// output. The input is divided by `input_scale` first.
template <typename T>
class Siren {
 public:
  Siren() = default;
  Siren(const std::string& name, std::size_t in, std::size_t hidden, std::size_t hidden_layers, std::size_t out,
        Rng& rng, T first_omega = T(30), T input_scale = T(1));

  Var<T> operator()(const Var<T>& x) const;
  void collect(ParamRefs<T>& out);

  std::vector<Linear<T>> layers;
  T first_omega = T(30);
  T hidden_omega = T(1);
  T input_scale = T(1);
};

template <typename T>
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(const std::string& name, std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
         std::size_t dilation, Rng& rng, bool bias = true);

  // Causal: [Cin, L] -> [Cout, L].
  Var<T> operator()(const Var<T>& x) const { return forward(x, context()); }
  // Explicit left zero-padding; with left_pad = 0 the first context() samples
  // of x act as history and the output is context() samples shorter.
  Var<T> forward(const Var<T>& x, std::size_t left_pad) const;
  void collect(ParamRefs<T>& out);

  std::size_t context() const { return (kernel - 1) * dilation; }

  Parameter<T> weight;  // [Cout, Cin, K]
  Parameter<T> bias;    // [Cout, 1]
  std::size_t kernel = 1;
  std::size_t dilation = 1;
  bool has_bias = true;
};

template <typename T>
struct LstmState {
  Tensor<T> h;  // [H, 1]
  Tensor<T> c;  // [H, 1]
};

// Single-layer LSTM with input, forget, cell and output gates. One bias
// vector; the forget-gate bias starts at 1.
template <typename T>
class Lstm {
 public:
  Lstm() = default;
  Lstm(const std::string& name, std::size_t input, std::size_t hidden, Rng& rng);

  struct Output {
    Var<T> sequence;  // [H, steps]
    Var<T> h;         // [H, 1]
    Var<T> c;         // [H, 1]
  };
  // x [I, steps]; h0, c0 [H, 1] on the same tape.
  Output operator()(const Var<T>& x, const Var<T>& h0, const Var<T>& c0) const;
  Output operator()(const Var<T>& x, const LstmState<T>& state) const;
  void collect(ParamRefs<T>& out);

  LstmState<T> zero_state() const;
  std::size_t input_size() const { return w_ih.value.dim(1); }
  std::size_t hidden_size() const { return w_hh.value.dim(1); }

  Parameter<T> w_ih;  // [4H, I]
  Parameter<T> w_hh;  // [4H, H]
  Parameter<T> bias;  // [4H, 1]
};

template <typename T>
LstmState<T> detach(const typename Lstm<T>::Output& out) {
  return {out.h.value(), out.c.value()};
}

// Recurrent state of a stack of LSTMs, one entry per layer.
template <typename T>
using StateList = std::vector<LstmState<T>>;

// Runs x [I, steps] through the stack. With `state` non-null the stack starts
// from it (zero state where it is empty) and it receives the final detached
// state; with a null `state` the run starts from zeros.
template <typename T>
Var<T> run_lstm_stack(const std::vector<Lstm<T>>& stack, const Var<T>& x, StateList<T>* state);

// Normalizes each channel over the time axis. Training mode uses the
// statistics of the current input and updates the running averages; eval mode
// uses the running averages.
template <typename T>
class BatchNorm1d {
 public:
  BatchNorm1d() = default;
  BatchNorm1d(const std::string& name, std::size_t channels);

  Var<T> forward(const Var<T>& x, bool training);
  void collect(ParamRefs<T>& out);
  void collect_buffers(ParamRefs<T>& out);

  Parameter<T> gamma;         // [C, 1]
  Parameter<T> beta;          // [C, 1]
  Parameter<T> running_mean;  // buffer [C, 1]
  Parameter<T> running_var;   // buffer [C, 1]
  T momentum = T(0.1);
  T eps = T(1e-5);
};

}  // namespace deffx::nn
