#pragma once

// Gradient-check cases for every autodiff primitive, shared by the unit tests
// and the acceptance suite.

#include <vector>

#include "deffx/autodiff/grad_check.hpp"
#include "deffx/autodiff/ops.hpp"
#include "support.hpp"

namespace deffx::test {

// Scalar probe with a distinct random weight per element so that no gradient
// entry vanishes by symmetry.
inline Var<double> probe(const Var<double>& v, std::uint64_t seed = 99) {
  const Var<double> w = constant_like(v, random_tensor(v.shape(), seed, 0.5, 1.5));
  return sum(v * w);
}

struct GradCase {
  const char* name;
  GradFn f;
  std::vector<Tensor<double>> inputs;
};

inline std::vector<GradCase> primitive_cases() {
  using V = Var<double>;
  using Args = std::span<const V>;
  const auto away_from_zero = [](Shape s, std::uint64_t seed) {
    Tensor<double> t = random_tensor(std::move(s), seed, 0.3, 1.0);
    for (std::size_t i = 0; i < t.size(); i += 2) t[i] = -t[i];
    return t;
  };
  return {
      {"add", [](Tape<double>&, Args a) { return probe(a[0] + a[1]); }, {random_tensor({3, 4}, 1), random_tensor({3, 4}, 2)}},
      {"add_broadcast", [](Tape<double>&, Args a) { return probe(a[0] + a[1]); }, {random_tensor({3, 4}, 1), random_tensor({3, 1}, 2)}},
      {"sub_broadcast", [](Tape<double>&, Args a) { return probe(a[0] - a[1]); }, {random_tensor({4}, 1), random_tensor({2, 3, 4}, 2)}},
      {"mul_broadcast", [](Tape<double>&, Args a) { return probe(a[0] * a[1]); }, {random_tensor({2, 3, 4}, 1), random_tensor({1, 4}, 2)}},
      {"mul_scalar_shape", [](Tape<double>&, Args a) { return probe(a[0] * a[1]); }, {random_tensor({5}, 1), random_tensor({}, 2)}},
      {"div", [](Tape<double>&, Args a) { return probe(a[0] / a[1]); }, {random_tensor({3, 4}, 1), random_tensor({3, 1}, 2, 0.5, 2.0)}},
      {"neg", [](Tape<double>&, Args a) { return probe(-a[0]); }, {random_tensor({6}, 1)}},
      {"scale_shift", [](Tape<double>&, Args a) { return probe(2.5 * a[0] + 0.25); }, {random_tensor({6}, 1)}},
      {"pow3", [](Tape<double>&, Args a) { return probe(pow(a[0], 3)); }, {away_from_zero({6}, 1)}},
      {"pow_neg2", [](Tape<double>&, Args a) { return probe(pow(a[0], -2)); }, {away_from_zero({6}, 1)}},
      {"tanh", [](Tape<double>&, Args a) { return probe(tanh(a[0])); }, {random_tensor({6}, 1, -3, 3)}},
      {"sigmoid", [](Tape<double>&, Args a) { return probe(sigmoid(a[0])); }, {random_tensor({6}, 1, -5, 5)}},
      {"sin", [](Tape<double>&, Args a) { return probe(sin(a[0])); }, {random_tensor({6}, 1, -3, 3)}},
      {"cos", [](Tape<double>&, Args a) { return probe(cos(a[0])); }, {random_tensor({6}, 1, 0.2, 3)}},
      {"exp", [](Tape<double>&, Args a) { return probe(exp(a[0])); }, {random_tensor({6}, 1)}},
      {"log", [](Tape<double>&, Args a) { return probe(log(a[0])); }, {random_tensor({6}, 1, 0.2, 3)}},
      {"sqrt", [](Tape<double>&, Args a) { return probe(sqrt(a[0])); }, {random_tensor({6}, 1, 0.2, 3)}},
      {"abs", [](Tape<double>&, Args a) { return probe(abs(a[0])); }, {away_from_zero({6}, 1)}},
      {"clamp", [](Tape<double>&, Args a) { return probe(clamp(a[0], -0.5, 0.5)); }, {random_tensor({16}, 1)}},
      {"maximum", [](Tape<double>&, Args a) { return probe(maximum(a[0], 0.1)); }, {random_tensor({16}, 1)}},
      {"sum_all", [](Tape<double>&, Args a) { return sum(a[0]); }, {random_tensor({3, 4}, 1)}},
      {"mean_all", [](Tape<double>&, Args a) { return mean(a[0]); }, {random_tensor({3, 4}, 1)}},
      {"sum_axis0", [](Tape<double>&, Args a) { return probe(sum(a[0], 0)); }, {random_tensor({3, 4, 2}, 1)}},
      {"sum_axis1", [](Tape<double>&, Args a) { return probe(sum(a[0], 1)); }, {random_tensor({3, 4, 2}, 1)}},
      {"mean_last", [](Tape<double>&, Args a) { return probe(mean(a[0], 2)); }, {random_tensor({3, 4, 5}, 1)}},
      {"reshape", [](Tape<double>&, Args a) { return probe(reshape(a[0], {4, 3})); }, {random_tensor({3, 4}, 1)}},
      {"transpose", [](Tape<double>&, Args a) { return probe(transpose(a[0])); }, {random_tensor({3, 4}, 1)}},
      {"slice", [](Tape<double>&, Args a) { return probe(slice(a[0], 1, 1, 2)); }, {random_tensor({3, 4}, 1)}},
      {"concat", [](Tape<double>&, Args a) { return probe(concat(std::vector<V>{a[0], a[1]}, 1)); }, {random_tensor({2, 3}, 1), random_tensor({2, 5}, 2)}},
      {"concat_axis0", [](Tape<double>&, Args a) { return probe(concat(std::vector<V>{a[0], a[1], a[0]}, 0)); }, {random_tensor({1, 3}, 1), random_tensor({2, 3}, 2)}},
      {"repeat", [](Tape<double>&, Args a) { return probe(repeat(a[0], 1, 3)); }, {random_tensor({2, 2}, 1)}},
      {"matmul", [](Tape<double>&, Args a) { return probe(matmul(a[0], a[1])); }, {random_tensor({3, 4}, 1), random_tensor({4, 5}, 2)}},
      {"matmul_vec", [](Tape<double>&, Args a) { return probe(matmul(a[0], a[1])); }, {random_tensor({3, 4}, 1), random_tensor({4, 1}, 2)}},
      {"conv1d_causal", [](Tape<double>&, Args a) { return probe(conv1d(a[0], a[1], 3, 6)); }, {random_tensor({2, 20}, 1), random_tensor({3, 2, 3}, 2)}},
      {"conv1d_valid", [](Tape<double>&, Args a) { return probe(conv1d(a[0], a[1], 1, 0)); }, {random_tensor({2, 9}, 1), random_tensor({1, 2, 4}, 2)}},
      {"max_pool1d", [](Tape<double>&, Args a) { return probe(max_pool1d(a[0], 4)); }, {random_tensor({2, 12}, 1)}},
      {"max_pool1d_partial", [](Tape<double>&, Args a) { return probe(max_pool1d(a[0], 4)); }, {random_tensor({2, 10}, 1)}},
      {"avg_pool1d", [](Tape<double>&, Args a) { return probe(avg_pool1d(a[0], 3)); }, {random_tensor({2, 10}, 1)}},
      {"upsample", [](Tape<double>&, Args a) { return probe(upsample_nearest1d(a[0], 4, 10)); }, {random_tensor({2, 3}, 1)}},
      {"frame", [](Tape<double>&, Args a) { return probe(frame(a[0], 8, 3)); }, {random_tensor({20}, 1)}},
      {"rfft", [](Tape<double>&, Args a) { return probe(rfft(a[0], 16)); }, {random_tensor({2, 11}, 1)}},
      {"irfft", [](Tape<double>&, Args a) { return probe(irfft(a[0], 16)); }, {random_tensor({9, 2}, 1)}},
      {"cmul", [](Tape<double>&, Args a) { return probe(cmul(a[0], a[1])); }, {random_tensor({2, 5, 2}, 1), random_tensor({5, 2}, 2)}},
      {"cabs", [](Tape<double>&, Args a) { return probe(cabs(a[0], 1e-8)); }, {random_tensor({6, 2}, 1)}},
      {"biquad_response", [](Tape<double>&, Args a) { return probe(biquad_response(a[0], 32)); },
       {Tensor<double>({2, 6}, {0.3, 0.2, 0.1, 1.0, -0.4, 0.2, 0.5, -0.3, 0.2, 1.2, 0.3, 0.1})}},
  };
}

}  // namespace deffx::test
