#include "deffx/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "deffx/core/error.hpp"

namespace deffx {

namespace {

double checked_value(const Var<double>& v) {
  if (v.size() != 1) throw InvalidArgument("grad_check function must return a scalar, got " + to_string(v.shape()));
  const double x = v.value()[0];
  if (!std::isfinite(x)) throw NumericError("grad_check forward value is not finite");
  return x;
}

void compare(GradCheckReport& r, std::size_t input, std::size_t index, double a, double n, double floor) {
  const double err = std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
  ++r.checked;
  if (r.checked == 1 || err > r.max_rel_error) {
    r.max_rel_error = err;
    r.worst_input = input;
    r.worst_index = index;
    r.analytic = a;
    r.numeric = n;
  }
}

}  // namespace

GradCheckReport grad_check(const GradFn& f, const std::vector<Tensor<double>>& inputs, double eps, double floor) {
  auto eval = [&](const std::vector<Tensor<double>>& xs, std::vector<Tensor<double>>* grads) {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    vars.reserve(xs.size());
    for (const auto& x : xs) vars.push_back(tape.leaf(x));
    const Var<double> out = f(tape, vars);
    const double value = checked_value(out);
    if (grads) {
      const Gradients<double> g = tape.backward(out);
      grads->clear();
      for (const auto& v : vars) grads->push_back(g[v]);
    }
    return value;
  };

  std::vector<Tensor<double>> analytic;
  eval(inputs, &analytic);
  GradCheckReport report;
  std::vector<Tensor<double>> probe = inputs;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    for (std::size_t j = 0; j < probe[i].size(); ++j) {
      const double x0 = probe[i][j];
      probe[i][j] = x0 + eps;
      const double up = eval(probe, nullptr);
      probe[i][j] = x0 - eps;
      const double down = eval(probe, nullptr);
      probe[i][j] = x0;
      compare(report, i, j, analytic[i][j], (up - down) / (2.0 * eps), floor);
    }
  }
  return report;
}

GradCheckReport grad_check(const ParamGradFn& f, std::span<Parameter<double>* const> params, double eps, double floor) {
  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    const Var<double> out = f(tape);
    checked_value(out);
    const Gradients<double> g = tape.backward(out);
    for (Parameter<double>* p : params) {
      const Tensor<double>* gp = g.find(*p);
      analytic.push_back(gp ? *gp : Tensor<double>(p->value.shape()));
    }
  }
  auto eval = [&] {
    Tape<double> tape;
    tape.set_grad_enabled(false);
    return checked_value(f(tape));
  };
  GradCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<double>& v = params[i]->value;
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double x0 = v[j];
      v[j] = x0 + eps;
      const double up = eval();
      v[j] = x0 - eps;
      const double down = eval();
      v[j] = x0;
      compare(report, i, j, analytic[i][j], (up - down) / (2.0 * eps), floor);
    }
  }
  return report;
}

}  // namespace deffx
