#pragma once

// Controllers produce the normalized parameters g in [0, 1] that drive one
// gray-box processor.

#include <optional>
#include <string>
#include <string_view>

#include "deffx/dsp/processors.hpp"
#include "deffx/nn/layers.hpp"

namespace deffx::control {

enum class ControllerKind { kDummy, kStatic, kStaticCond, kDynamic, kDynamicCond };

// "dummy", "static", "static_cond", "dynamic", "dynamic_cond".
std::string_view controller_kind_name(ControllerKind kind);
std::optional<ControllerKind> parse_controller_kind(std::string_view name);

struct ControllerConfig {
  ControllerKind kind = ControllerKind::kDummy;
  std::size_t mlp_hidden = 16;  // static_cond
  std::size_t mlp_layers = 3;   // static_cond, counting the output layer
  std::size_t lstm_layers = 1;  // dynamic, dynamic_cond
  std::size_t block_size = 128;
};

std::size_t num_blocks(std::size_t length, std::size_t block_size);

template <typename T>
class Controller {
 public:
  Controller(const ControllerConfig& cfg, std::size_t num_params, std::size_t num_controls, const std::string& name,
             Rng& rng);

  ControllerKind kind() const { return cfg_.kind; }
  const ControllerConfig& config() const { return cfg_; }
  std::size_t num_params() const { return num_params_; }
  std::size_t num_controls() const { return num_controls_; }
  bool recurrent() const { return cfg_.kind == ControllerKind::kDynamic || cfg_.kind == ControllerKind::kDynamicCond; }

  // x [1, L] is the signal entering the stage; c [num_controls] (ignored by
  // controllers that do not use it). Dummy controllers return empty values.
  dsp::Controls<T> operator()(const Var<T>& x, const Var<T>& c, nn::StateList<T>* state) const;
  void collect(nn::ParamRefs<T>& out);

  Parameter<T> bias;  // static: g = sigmoid(bias)
  nn::Mlp<T> mlp;
  std::vector<nn::Lstm<T>> lstm;

 private:
  ControllerConfig cfg_;
  std::size_t num_params_ = 0;
  std::size_t num_controls_ = 0;
};

// [nc] controls repeated over `steps` columns: [nc, steps].
template <typename T>
Var<T> repeat_controls(const Var<T>& c, std::size_t steps);

}  // namespace deffx::control
