#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "deffx/autodiff/fft.hpp"
#include "deffx/autodiff/grad_check.hpp"
#include "deffx/autodiff/ops.hpp"
#include "deffx/core/error.hpp"
#include "grad_cases.hpp"

namespace deffx {
namespace {

using V = Var<double>;
using Args = std::span<const V>;

using test::probe;

double check(const GradFn& f, std::vector<Tensor<double>> inputs) {
  return grad_check(f, inputs).max_rel_error;
}

constexpr double kTol = 1e-6;

TEST(Backward, SumGivesOnes) {
  Tape<double> t;
  const V x = t.leaf(Tensor<double>::vector({1.0, -2.0, 3.0}));
  const auto g = t.backward(sum(x));
  EXPECT_EQ(g[x].storage(), (std::vector<double>{1, 1, 1}));
}

TEST(Backward, SquareGivesTwoX) {
  Tape<double> t;
  const V x = t.leaf(Tensor<double>::vector({2.0}));
  EXPECT_DOUBLE_EQ(t.backward(sum(x * x))[x][0], 4.0);
}

TEST(Backward, FftRoundTripGradientIsOnes) {
  Tape<double> t;
  const V x = t.leaf(test::random_tensor({16}, 3));
  const auto g = t.backward(sum(irfft(rfft(x, 16), 16)));
  for (double v : g[x].storage()) EXPECT_NEAR(v, 1.0, 1e-12);
  EXPECT_LT(check([](Tape<double>&, Args a) { return sum(irfft(rfft(a[0], 16), 16)); },
                  {test::random_tensor({16}, 3)}),
            1e-5);
}

TEST(Backward, NonScalarRootRejected) {
  Tape<double> t;
  const V x = t.leaf(test::random_tensor({3}, 1));
  EXPECT_THROW(t.backward(x), InvalidArgument);
}

TEST(Backward, RootFromOtherTapeRejected) {
  Tape<double> t1, t2;
  const V x = t1.leaf(test::random_tensor({3}, 1));
  EXPECT_THROW(t2.backward(sum(x)), InvalidArgument);
}

TEST(Backward, MixingTapesRejected) {
  Tape<double> t1, t2;
  const V x = t1.leaf(test::random_tensor({3}, 1));
  const V y = t2.leaf(test::random_tensor({3}, 2));
  EXPECT_THROW(add(x, y), InvalidArgument);
}

TEST(Backward, Linearity) {
  const Tensor<double> x0 = test::random_tensor({8}, 5);
  auto grad_of = [&](auto&& fn) {
    Tape<double> t;
    const V x = t.leaf(x0);
    return t.backward(fn(x))[x];
  };
  const auto f = [](const V& x) { return sum(tanh(x) * x); };
  const auto g = [](const V& x) { return sum(sin(x)); };
  const auto gf = grad_of(f);
  const auto gg = grad_of(g);
  const auto gc = grad_of([&](const V& x) { return 2.5 * f(x) + (-0.75) * g(x); });
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(gc[i], 2.5 * gf[i] - 0.75 * gg[i], 1e-12);
}

TEST(Backward, ParamBindingIsCached) {
  Parameter<double> p{"w", test::random_tensor({4}, 1)};
  Tape<double> t;
  const V a = t.param(p);
  const V b = t.param(p);
  EXPECT_EQ(a.id(), b.id());
  const auto g = t.backward(sum(a * b));
  ASSERT_NE(g.find(p), nullptr);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR((*g.find(p))[i], 2 * p.value[i], 1e-12);
}

TEST(Backward, GradDisabledRecordsNoGraph) {
  Parameter<double> p{"w", test::random_tensor({4}, 1)};
  Tape<double> t;
  t.set_grad_enabled(false);
  const V a = t.param(p);
  EXPECT_FALSE(a.requires_grad());
  EXPECT_FALSE(sum(a * a).requires_grad());
}

TEST(GradCheck, TanhSum) {
  EXPECT_LT(grad_check([](Tape<double>&, Args a) { return sum(tanh(a[0])); }, {test::random_tensor({32}, 1)}, 1e-5)
                .max_rel_error,
            1e-6);
}

TEST(GradCheck, ConstantIsZero) {
  const auto r = grad_check([](Tape<double>& t, Args) { return t.constant(Tensor<double>::scalar(3.0)) + 0.0; },
                            {test::random_tensor({4}, 1)});
  EXPECT_EQ(r.max_rel_error, 0.0);
}

TEST(GradCheck, NonFiniteForwardThrows) {
  EXPECT_THROW(grad_check([](Tape<double>&, Args a) { return sum(log(a[0])); }, {Tensor<double>::vector({-1.0})}),
               NumericError);
}

TEST(GradCheck, ParameterOverload) {
  Parameter<double> p{"w", test::random_tensor({5}, 4)};
  Parameter<double>* ps[] = {&p};
  const auto r = grad_check([&](Tape<double>& t) { return probe(sin(t.param(p))); }, ps);
  EXPECT_LT(r.max_rel_error, kTol);
  EXPECT_EQ(r.checked, 5u);
}

class PrimitiveGrad : public ::testing::TestWithParam<std::size_t> {};

TEST_P(PrimitiveGrad, CentralDifferences) {
  const auto c = test::primitive_cases().at(GetParam());
  const auto r = grad_check(c.f, c.inputs);
  EXPECT_LT(r.max_rel_error, 1e-6) << c.name << ": input " << r.worst_input << "[" << r.worst_index
                                   << "] analytic " << r.analytic << " numeric " << r.numeric;
}

INSTANTIATE_TEST_SUITE_P(All, PrimitiveGrad, ::testing::Range<std::size_t>(0, test::primitive_cases().size()),
                         [](const auto& info) { return std::string(test::primitive_cases()[info.param].name); });

// --- forward semantics ---------------------------------------------------

TEST(Ops, BroadcastShapes) {
  EXPECT_EQ(broadcast_shapes({3, 1}, {4}), (Shape{3, 4}));
  EXPECT_EQ(broadcast_shapes({}, {2, 2}), (Shape{2, 2}));
  EXPECT_THROW(broadcast_shapes({3}, {4}), InvalidArgument);
}

TEST(Ops, CausalConvDependsOnlyOnPast) {
  const std::size_t k = 3, d = 4, len = 40;
  const Tensor<double> w = test::random_tensor({2, 1, k}, 7);
  Tensor<double> x = test::random_tensor({1, len}, 8);
  auto run = [&](const Tensor<double>& in) {
    Tape<double> t;
    t.set_grad_enabled(false);
    return conv1d(t.constant(in), t.constant(w), d, (k - 1) * d).value();
  };
  const auto base = run(x);
  ASSERT_EQ(base.shape(), (Shape{2, len}));
  const std::size_t n = 20;
  x[n + 1] += 1.0;
  const auto perturbed = run(x);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i <= n; ++i) EXPECT_EQ(base.at(c, i), perturbed.at(c, i));
  }
  // Output n reads exactly (k-1)*d samples of left context.
  Tensor<double> y = test::random_tensor({1, len}, 8);
  y[n - (k - 1) * d] += 1.0;
  EXPECT_NE(run(y).at(0, n), base.at(0, n));
  Tensor<double> z = test::random_tensor({1, len}, 8);
  z[n - (k - 1) * d - 1] += 1.0;
  EXPECT_EQ(run(z).at(0, n), base.at(0, n));
}

TEST(Ops, MaxPoolPadsPartialBlockWithZero) {
  Tape<double> t;
  const V x = t.leaf(Tensor<double>({1, 5}, {-3, -2, -1, -4, -5}));
  const V y = max_pool1d(x, 2);
  EXPECT_EQ(y.value().storage(), (std::vector<double>{-2, -1, 0}));
}

TEST(Ops, UpsampleHoldsBlocks) {
  Tape<double> t;
  const V x = t.leaf(Tensor<double>({1, 2}, {1, 2}));
  EXPECT_EQ(upsample_nearest1d(x, 3, 5).value().storage(), (std::vector<double>{1, 1, 1, 2, 2}));
}

TEST(Ops, SliceOutOfRangeRejected) {
  Tape<double> t;
  const V x = t.leaf(test::random_tensor({2, 4}, 1));
  EXPECT_THROW(slice(x, 1, 3, 2), InvalidArgument);
}

// --- FFT ------------------------------------------------------------------

std::vector<std::complex<double>> naive_dft(const std::vector<double>& x, std::size_t n) {
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    for (std::size_t t = 0; t < x.size(); ++t) {
      out[k] += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * t) / double(n));
    }
  }
  return out;
}

TEST(Fft, MatchesNaiveDft) {
  for (std::size_t n : {2u, 4u, 8u, 64u, 1024u}) {
    const auto x = test::uniform(n, n);
    std::vector<std::complex<double>> got(n / 2 + 1);
    fft::rfft<double>(x, got);
    const auto ref = naive_dft(x, n);
    for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_LT(std::abs(ref[k] - got[k]), 1e-9 * double(n)) << n;
    std::vector<double> back(n);
    fft::irfft<double>(got, back);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(back[i], x[i], 1e-12);
  }
}

TEST(Fft, FloatPrecisionRoundTrip) {
  const auto xd = test::uniform(4096, 1);
  std::vector<float> x(xd.begin(), xd.end()), back(4096);
  std::vector<std::complex<float>> spec(2049);
  fft::rfft<float>(x, spec);
  fft::irfft<float>(spec, back);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back[i], x[i], 1e-5f);
}

TEST(Fft, ZeroPaddedRfftOp) {
  const auto x = test::uniform(5, 2);
  Tape<double> t;
  const V y = rfft(t.constant(Tensor<double>::vector(x)), 8);
  ASSERT_EQ(y.shape(), (Shape{5, 2}));
  const auto ref = naive_dft(x, 8);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_NEAR(y.value()[2 * k], ref[k].real(), 1e-12);
    EXPECT_NEAR(y.value()[2 * k + 1], ref[k].imag(), 1e-12);
  }
}

TEST(Fft, RejectsNonPowerOfTwo) {
  Tape<double> t;
  EXPECT_THROW(rfft(t.constant(test::random_tensor({6}, 1)), 12), InvalidArgument);
  EXPECT_THROW(rfft(t.constant(test::random_tensor({20}, 1)), 16), InvalidArgument);
}

TEST(Ops, BiquadResponseMatchesDirectEvaluation) {
  const std::vector<double> c = {0.3, 0.2, 0.1, 1.0, -0.4, 0.2, 0.5, -0.3, 0.2, 1.2, 0.3, 0.1};
  Tape<double> t;
  const V h = biquad_response(t.constant(Tensor<double>({2, 6}, c)), 16);
  for (std::size_t j = 0; j <= 8; ++j) {
    const auto z = std::polar(1.0, -2.0 * std::numbers::pi * double(j) / 16.0);
    std::complex<double> ref(1.0);
    for (std::size_t k = 0; k < 2; ++k) {
      const double* s = c.data() + 6 * k;
      ref *= (s[0] + s[1] * z + s[2] * z * z) / (s[3] + s[4] * z + s[5] * z * z);
    }
    EXPECT_NEAR(h.value()[2 * j], ref.real(), 1e-12);
    EXPECT_NEAR(h.value()[2 * j + 1], ref.imag(), 1e-12);
  }
}

TEST(Ops, FloatTapeWorks) {
  Tape<float> t;
  const Var<float> x = t.leaf(Tensor<float>::vector({1.f, 2.f}));
  const auto g = t.backward(sum(x * x * 3.0f));
  EXPECT_FLOAT_EQ(g[x][1], 12.f);
}

}  // namespace
}  // namespace deffx
