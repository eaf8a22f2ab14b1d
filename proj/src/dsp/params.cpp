#include "deffx/dsp/params.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "../autodiff/ops_util.hpp"

namespace deffx::dsp {

void validate(const ParamRange& r) {
  if (!(r.min < r.max)) throw InvalidArgument("parameter range needs min < max");
  if (r.scale == RangeScale::kLog && !(r.min > 0.0)) throw InvalidArgument("log parameter range needs min > 0");
}

double denormalize(double u, const ParamRange& r) {
  if (u < 0.0 || u > 1.0) {
    spdlog::warn("normalized value {} outside [0, 1], clamped", u);
    u = std::clamp(u, 0.0, 1.0);
  }
  if (r.scale == RangeScale::kLinear) return r.min + u * (r.max - r.min);
  return r.min * std::pow(r.max / r.min, u);
}

double normalize(double value, const ParamRange& r) {
  if (r.scale == RangeScale::kLinear) return (value - r.min) / (r.max - r.min);
  return std::log(value / r.min) / std::log(r.max / r.min);
}

template <typename T>
Var<T> denormalize(const Var<T>& u, const ParamRange& r) {
  if (r.scale == RangeScale::kLinear) return shift(scale(u, static_cast<T>(r.max - r.min)), static_cast<T>(r.min));
  return scale(exp(scale(u, static_cast<T>(std::log(r.max / r.min)))), static_cast<T>(r.min));
}

ParamRange frequency_range(double fs) { return {20.0, 0.95 * fs / 2.0, RangeScale::kLog}; }
ParamRange filter_gain_range() { return {-24.0, 24.0, RangeScale::kLinear}; }
ParamRange q_range() { return {0.3, 10.0, RangeScale::kLog}; }
ParamRange chain_gain_range() { return {-40.0, 40.0, RangeScale::kLinear}; }
ParamRange offset_range() { return {-1.0, 1.0, RangeScale::kLinear}; }

template Var<float> denormalize<float>(const Var<float>&, const ParamRange&);
template Var<double> denormalize<double>(const Var<double>&, const ParamRange&);

}  // namespace deffx::dsp
