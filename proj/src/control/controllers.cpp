#include "deffx/control/controllers.hpp"

#include <array>

#include "../autodiff/ops_util.hpp"

namespace deffx::control {

namespace {
constexpr std::array<std::pair<ControllerKind, std::string_view>, 5> kNames = {{
    {ControllerKind::kDummy, "dummy"},
    {ControllerKind::kStatic, "static"},
    {ControllerKind::kStaticCond, "static_cond"},
    {ControllerKind::kDynamic, "dynamic"},
    {ControllerKind::kDynamicCond, "dynamic_cond"},
}};
}  // namespace

std::string_view controller_kind_name(ControllerKind kind) {
  for (const auto& [k, n] : kNames)
    if (k == kind) return n;
  return "unknown";
}

std::optional<ControllerKind> parse_controller_kind(std::string_view name) {
  for (const auto& [k, n] : kNames)
    if (n == name) return k;
  return std::nullopt;
}

std::size_t num_blocks(std::size_t length, std::size_t block_size) {
  if (block_size == 0) throw InvalidArgument("block size must be >= 1");
  return (length + block_size - 1) / block_size;
}

template <typename T>
Var<T> repeat_controls(const Var<T>& c, std::size_t steps) {
  return repeat(reshape(c, {c.size(), 1}), 1, steps);
}

template <typename T>
Controller<T>::Controller(const ControllerConfig& cfg, std::size_t num_params, std::size_t num_controls,
                          const std::string& name, Rng& rng)
    : cfg_(cfg), num_params_(num_params), num_controls_(num_controls) {
  const bool conditional = cfg.kind == ControllerKind::kStaticCond || cfg.kind == ControllerKind::kDynamicCond;
  if (conditional && num_controls == 0) {
    throw InvalidArgument(name + ": " + std::string(controller_kind_name(cfg.kind)) + " needs at least one control");
  }
  if (cfg.kind == ControllerKind::kDummy) {
    if (num_params != 0) {
      throw InvalidArgument(name + ": dummy controller attached to a processor with " + std::to_string(num_params) +
                            " parameters");
    }
    return;
  }
  if (num_params == 0) throw InvalidArgument(name + ": processor has no parameters to control");
  switch (cfg.kind) {
    case ControllerKind::kStatic:
      bias = {name + ".bias", Tensor<T>({num_params})};
      break;
    case ControllerKind::kStaticCond: {
      if (cfg.mlp_layers == 0) throw InvalidArgument(name + ": mlp_layers must be >= 1");
      std::vector<std::size_t> sizes{num_controls};
      for (std::size_t i = 0; i + 1 < cfg.mlp_layers; ++i) sizes.push_back(cfg.mlp_hidden);
      sizes.push_back(num_params);
      mlp = nn::Mlp<T>(name + ".mlp", sizes, nn::Activation::kTanh, nn::Activation::kSigmoid, rng);
      break;
    }
    case ControllerKind::kDynamic:
    case ControllerKind::kDynamicCond: {
      if (cfg.lstm_layers == 0) throw InvalidArgument(name + ": lstm_layers must be >= 1");
      if (cfg.block_size == 0) throw InvalidArgument(name + ": block_size must be >= 1");
      std::size_t in = cfg.kind == ControllerKind::kDynamic ? 1 : 1 + num_controls;
      for (std::size_t i = 0; i < cfg.lstm_layers; ++i) {
        lstm.emplace_back(name + ".lstm." + std::to_string(i), in, num_params, rng);
        in = num_params;
      }
      break;
    }
    case ControllerKind::kDummy:
      break;
  }
}

template <typename T>
dsp::Controls<T> Controller<T>::operator()(const Var<T>& x, const Var<T>& c, nn::StateList<T>* state) const {
  Tape<T>& t = x.tape();
  const bool conditional = cfg_.kind == ControllerKind::kStaticCond || cfg_.kind == ControllerKind::kDynamicCond;
  if (conditional && (!c.valid() || c.size() != num_controls_)) {
    throw InvalidArgument("controller expects " + std::to_string(num_controls_) + " controls, got " +
                          std::to_string(c.valid() ? c.size() : 0));
  }
  switch (cfg_.kind) {
    case ControllerKind::kDummy:
      return {};
    case ControllerKind::kStatic:
      return {sigmoid(t.param(bias)), 0};
    case ControllerKind::kStaticCond:
      return {reshape(mlp(reshape(c, {num_controls_, 1})), {num_params_}), 0};
    case ControllerKind::kDynamic:
    case ControllerKind::kDynamicCond: {
      if (x.shape().size() != 2 || x.dim(0) != 1 || x.dim(1) == 0) {
        throw InvalidArgument("dynamic controller expects a [1, L] signal, got " + to_string(x.shape()));
      }
      Var<T> in = avg_pool1d(x, cfg_.block_size);
      if (cfg_.kind == ControllerKind::kDynamicCond) in = concat<T>({in, repeat_controls(c, in.dim(1))}, 0);
      const Var<T> h = nn::run_lstm_stack(lstm, in, state);
      return {transpose(sigmoid(h)), cfg_.block_size};
    }
  }
  return {};
}

template <typename T>
void Controller<T>::collect(nn::ParamRefs<T>& out) {
  switch (cfg_.kind) {
    case ControllerKind::kStatic:
      out.push_back(&bias);
      break;
    case ControllerKind::kStaticCond:
      mlp.collect(out);
      break;
    case ControllerKind::kDynamic:
    case ControllerKind::kDynamicCond:
      for (auto& l : lstm) l.collect(out);
      break;
    case ControllerKind::kDummy:
      break;
  }
}

#define DEFFX_INSTANTIATE(T)       \
  template class Controller<T>;    \
  template Var<T> repeat_controls<T>(const Var<T>&, std::size_t);

DEFFX_INSTANTIATE_FLOAT_DOUBLE(DEFFX_INSTANTIATE)

}  // namespace deffx::control
