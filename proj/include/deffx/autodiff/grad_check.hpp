#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "deffx/autodiff/tape.hpp"

namespace deffx {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// Central differences against the tape gradient. Relative error per element is
// |a - n| / max(|a|, |n|, floor). Throws NumericError on a non-finite forward.
using GradFn = std::function<Var<double>(Tape<double>&, std::span<const Var<double>>)>;
GradCheckReport grad_check(const GradFn& f, const std::vector<Tensor<double>>& inputs, double eps = 1e-5,
                           double floor = 1e-8);

// Same check over parameters bound with tape.param() inside `f`. Parameter
// values are perturbed in place and restored afterwards.
using ParamGradFn = std::function<Var<double>(Tape<double>&)>;
GradCheckReport grad_check(const ParamGradFn& f, std::span<Parameter<double>* const> params, double eps = 1e-5,
                           double floor = 1e-8);

}  // namespace deffx
