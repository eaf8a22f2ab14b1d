#pragma once

// Pre-fit tanh approximations shipped with the library (data/*.json, embedded
// at build time). Regenerate with tools/fit/fit_tanh.py.

#include <string>
#include <string_view>
#include <vector>

#include "deffx/autodiff/tensor.hpp"

namespace deffx::dsp {

struct PrefitTensor {
  std::string name;
  Tensor<double> value;
};

struct Prefit {
  std::string kind;
  std::vector<PrefitTensor> tensors;
  std::vector<double> oracle_x;
  std::vector<double> oracle_y;
  // SIREN layout; zero for the rational fit.
  std::size_t hidden = 0;
  std::size_t hidden_layers = 0;
  double first_omega = 0.0;
  double input_scale = 1.0;

  const Tensor<double>& tensor(std::string_view name) const;
};

// "rational" or "siren". Throws IoError on malformed data.
const Prefit& tanh_prefit(std::string_view kind);

// Parses a prefit JSON document.
Prefit parse_prefit(std::string_view json_text);

}  // namespace deffx::dsp
