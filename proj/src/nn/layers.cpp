#include "deffx/nn/layers.hpp"

#include <cmath>

#include "../autodiff/ops_util.hpp"

namespace deffx::nn {

template <typename T>
std::size_t count_parameters(const ParamRefs<T>& params) {
  std::size_t n = 0;
  for (const auto* p : params) n += p->value.size();
  return n;
}

template <typename T>
Parameter<T> uniform_parameter(std::string name, Shape shape, double bound, Rng& rng) {
  Tensor<T> v(std::move(shape));
  for (auto& x : v.data()) x = static_cast<T>(rng.uniform(-bound, bound));
  return {std::move(name), std::move(v)};
}

template <typename T>
Var<T> activate(const Var<T>& x, Activation act, T omega) {
  switch (act) {
    case Activation::kNone:
      return x;
    case Activation::kTanh:
      return tanh(x);
    case Activation::kSigmoid:
      return sigmoid(x);
    case Activation::kSine:
      return sin(omega == T(1) ? x : scale(x, omega));
  }
  return x;
}

// --- Linear ----------------------------------------------------------------

template <typename T>
Linear<T>::Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng, bool with_bias)
    : has_bias(with_bias) {
  const double bound = std::sqrt(1.0 / static_cast<double>(in));
  weight = uniform_parameter<T>(name + ".weight", {out, in}, bound, rng);
  if (has_bias) bias = uniform_parameter<T>(name + ".bias", {out, 1}, bound, rng);
}

template <typename T>
Var<T> Linear<T>::operator()(const Var<T>& x) const {
  Tape<T>& t = x.tape();
  Var<T> y = matmul(t.param(weight), x);
  return has_bias ? y + t.param(bias) : y;
}

template <typename T>
void Linear<T>::collect(ParamRefs<T>& out) {
  out.push_back(&weight);
  if (has_bias) out.push_back(&bias);
}

// --- Mlp -------------------------------------------------------------------

template <typename T>
Mlp<T>::Mlp(const std::string& name, const std::vector<std::size_t>& sizes, Activation hidden, Activation output,
            Rng& rng)
    : hidden_act(hidden), output_act(output) {
  if (sizes.size() < 2) throw InvalidArgument("Mlp needs at least input and output sizes");
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    layers.emplace_back(name + ".layers." + std::to_string(i), sizes[i], sizes[i + 1], rng);
  }
}

template <typename T>
Var<T> Mlp<T>::operator()(const Var<T>& x) const {
  Var<T> h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = activate(layers[i](h), i + 1 == layers.size() ? output_act : hidden_act);
  }
  return h;
}

template <typename T>
void Mlp<T>::collect(ParamRefs<T>& out) {
  for (auto& l : layers) l.collect(out);
}

// --- Siren -----------------------------------------------------------------

template <typename T>
Siren<T>::Siren(const std::string& name, std::size_t in, std::size_t hidden, std::size_t hidden_layers,
                std::size_t out, Rng& rng, T omega, T scale_in)
    : first_omega(omega), input_scale(scale_in) {
  if (hidden_layers == 0) throw InvalidArgument("Siren needs at least one hidden layer");
  std::size_t width = in;
  for (std::size_t i = 0; i <= hidden_layers; ++i) {
    const std::size_t next = i == hidden_layers ? out : hidden;
    Linear<T> l(name + ".layers." + std::to_string(i), width, next, rng);
    const double w = static_cast<double>(width);
    const double bound = i == 0 ? 1.0 / w : std::sqrt(6.0 / w) / static_cast<double>(hidden_omega);
    for (auto& v : l.weight.value.data()) v = static_cast<T>(rng.uniform(-bound, bound));
    layers.push_back(std::move(l));
    width = next;
  }
}

template <typename T>
Var<T> Siren<T>::operator()(const Var<T>& x) const {
  Var<T> h = input_scale == T(1) ? x : scale(x, T(1) / input_scale);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    if (i + 1 < layers.size()) h = activate(h, Activation::kSine, i == 0 ? first_omega : hidden_omega);
  }
  return h;
}

template <typename T>
void Siren<T>::collect(ParamRefs<T>& out) {
  for (auto& l : layers) l.collect(out);
}

// --- Conv1d ----------------------------------------------------------------

template <typename T>
Conv1d<T>::Conv1d(const std::string& name, std::size_t cin, std::size_t cout, std::size_t k, std::size_t d, Rng& rng,
                  bool with_bias)
    : kernel(k), dilation(d), has_bias(with_bias) {
  if (k == 0 || d == 0) throw InvalidArgument("Conv1d kernel and dilation must be >= 1");
  const double bound = std::sqrt(1.0 / static_cast<double>(cin * k));
  weight = uniform_parameter<T>(name + ".weight", {cout, cin, k}, bound, rng);
  if (has_bias) bias = uniform_parameter<T>(name + ".bias", {cout, 1}, bound, rng);
}

template <typename T>
Var<T> Conv1d<T>::forward(const Var<T>& x, std::size_t left_pad) const {
  Tape<T>& t = x.tape();
  Var<T> y = conv1d(x, t.param(weight), dilation, left_pad);
  return has_bias ? y + t.param(bias) : y;
}

template <typename T>
void Conv1d<T>::collect(ParamRefs<T>& out) {
  out.push_back(&weight);
  if (has_bias) out.push_back(&bias);
}

// --- Lstm ------------------------------------------------------------------

template <typename T>
Lstm<T>::Lstm(const std::string& name, std::size_t input, std::size_t hidden, Rng& rng) {
  if (hidden == 0) throw InvalidArgument("Lstm hidden size must be >= 1");
  const double bound = std::sqrt(1.0 / static_cast<double>(hidden));
  w_ih = uniform_parameter<T>(name + ".w_ih", {4 * hidden, input}, bound, rng);
  w_hh = uniform_parameter<T>(name + ".w_hh", {4 * hidden, hidden}, bound, rng);
  bias = uniform_parameter<T>(name + ".bias", {4 * hidden, 1}, bound, rng);
  for (std::size_t i = hidden; i < 2 * hidden; ++i) bias.value[i] = T(1);
}

template <typename T>
LstmState<T> Lstm<T>::zero_state() const {
  const std::size_t h = hidden_size();
  return {Tensor<T>({h, 1}), Tensor<T>({h, 1})};
}

template <typename T>
typename Lstm<T>::Output Lstm<T>::operator()(const Var<T>& x, const LstmState<T>& state) const {
  Tape<T>& t = x.tape();
  return (*this)(x, t.constant(state.h), t.constant(state.c));
}

template <typename T>
typename Lstm<T>::Output Lstm<T>::operator()(const Var<T>& x, const Var<T>& h0, const Var<T>& c0) const {
  const std::size_t hs = hidden_size();
  if (x.shape().size() != 2 || x.dim(0) != input_size()) {
    throw InvalidArgument("Lstm expects [" + std::to_string(input_size()) + ", steps], got " + to_string(x.shape()));
  }
  Tape<T>& t = x.tape();
  const std::size_t steps = x.dim(1);
  const Var<T> pre = matmul(t.param(w_ih), x) + t.param(bias);
  const Var<T> whh = t.param(w_hh);
  Var<T> h = h0, c = c0;
  std::vector<Var<T>> outs;
  outs.reserve(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    const Var<T> g = slice(pre, 1, s, 1) + matmul(whh, h);
    const Var<T> i = sigmoid(slice(g, 0, 0, hs));
    const Var<T> f = sigmoid(slice(g, 0, hs, hs));
    const Var<T> u = tanh(slice(g, 0, 2 * hs, hs));
    const Var<T> o = sigmoid(slice(g, 0, 3 * hs, hs));
    c = f * c + i * u;
    h = o * tanh(c);
    outs.push_back(h);
  }
  Var<T> seq = steps == 0 ? t.constant(Tensor<T>({hs, 0})) : concat(outs, 1);
  return {seq, h, c};
}

template <typename T>
void Lstm<T>::collect(ParamRefs<T>& out) {
  out.push_back(&w_ih);
  out.push_back(&w_hh);
  out.push_back(&bias);
}

template <typename T>
Var<T> run_lstm_stack(const std::vector<Lstm<T>>& stack, const Var<T>& x, StateList<T>* state) {
  if (state && state->size() != stack.size()) state->resize(stack.size());
  Var<T> h = x;
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const Lstm<T>& layer = stack[i];
    LstmState<T> init = layer.zero_state();
    if (state && (*state)[i].h.size() == layer.hidden_size()) init = (*state)[i];
    const auto out = layer(h, init);
    if (state) (*state)[i] = detach<T>(out);
    h = out.sequence;
  }
  return h;
}

// --- BatchNorm1d -----------------------------------------------------------

template <typename T>
BatchNorm1d<T>::BatchNorm1d(const std::string& name, std::size_t channels)
    : gamma{name + ".gamma", Tensor<T>({channels, 1}, T(1))},
      beta{name + ".beta", Tensor<T>({channels, 1})},
      running_mean{name + ".running_mean", Tensor<T>({channels, 1})},
      running_var{name + ".running_var", Tensor<T>({channels, 1}, T(1))} {}

template <typename T>
Var<T> BatchNorm1d<T>::forward(const Var<T>& x, bool training) {
  Tape<T>& t = x.tape();
  const Var<T> g = t.param(gamma);
  const Var<T> b = t.param(beta);
  if (!training) {
    Tensor<T> inv_std = running_var.value;
    for (auto& v : inv_std.data()) v = T(1) / std::sqrt(v + eps);
    return (x - t.constant(running_mean.value)) * t.constant(inv_std) * g + b;
  }
  const std::size_t len = x.dim(1);
  const Var<T> m = mean(x, 1);
  const Var<T> xc = x - m;
  const Var<T> var = mean(xc * xc, 1);
  const Var<T> y = xc / sqrt(var + eps) * g + b;
  const T unbias = len > 1 ? static_cast<T>(len) / static_cast<T>(len - 1) : T(1);
  for (std::size_t c = 0; c < running_mean.value.size(); ++c) {
    running_mean.value[c] = (T(1) - momentum) * running_mean.value[c] + momentum * m.value()[c];
    running_var.value[c] = (T(1) - momentum) * running_var.value[c] + momentum * var.value()[c] * unbias;
  }
  return y;
}

template <typename T>
void BatchNorm1d<T>::collect(ParamRefs<T>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

template <typename T>
void BatchNorm1d<T>::collect_buffers(ParamRefs<T>& out) {
  out.push_back(&running_mean);
  out.push_back(&running_var);
}

#define DEFFX_INSTANTIATE(T)                                                                    \
  template std::size_t count_parameters<T>(const ParamRefs<T>&);                                \
  template Parameter<T> uniform_parameter<T>(std::string, Shape, double, Rng&);                 \
  template Var<T> activate<T>(const Var<T>&, Activation, T);                                    \
  template class Linear<T>;                                                                     \
  template class Mlp<T>;                                                                        \
  template class Siren<T>;                                                                      \
  template class Conv1d<T>;                                                                     \
  template class Lstm<T>;                                                                       \
  template class BatchNorm1d<T>;                                                                \
  template Var<T> run_lstm_stack<T>(const std::vector<Lstm<T>>&, const Var<T>&, StateList<T>*);

DEFFX_INSTANTIATE_FLOAT_DOUBLE(DEFFX_INSTANTIATE)

}  // namespace deffx::nn
