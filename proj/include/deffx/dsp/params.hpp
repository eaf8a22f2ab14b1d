#pragma once

#include <string>
#include <vector>

#include "deffx/autodiff/ops.hpp"

namespace deffx::dsp {

enum class RangeScale { kLinear, kLog };

struct ParamRange {
  double min = 0.0;
  double max = 1.0;
  RangeScale scale = RangeScale::kLinear;
};

// Throws InvalidArgument unless min < max (and min > 0 for log ranges).
void validate(const ParamRange& r);

// linear: min + u (max - min); log: min (max / min)^u. Values of u outside
// [0, 1] are clamped with a warning.
double denormalize(double u, const ParamRange& r);
double normalize(double value, const ParamRange& r);

// Differentiable form. Controller outputs are sigmoids, so no clamping.
template <typename T>
Var<T> denormalize(const Var<T>& u, const ParamRange& r);

// Defaults used when a config does not override them.
ParamRange frequency_range(double fs);  // log [20, 0.95 fs/2] Hz
ParamRange filter_gain_range();         // linear [-24, 24] dB
ParamRange q_range();                   // log [0.3, 10]
ParamRange chain_gain_range();          // linear [-40, 40] dB
ParamRange offset_range();              // linear [-1, 1]

struct ParamSpec {
  std::string name;  // e.g. "low_shelf.gain_db"
  ParamRange range;
};

}  // namespace deffx::dsp
