#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "deffx/autodiff/grad_check.hpp"
#include "deffx/core/error.hpp"
#include "deffx/dsp/biquad.hpp"
#include "deffx/dsp/prefit.hpp"
#include "deffx/dsp/processors.hpp"
#include "support.hpp"

namespace deffx::dsp {
namespace {

using V = Var<double>;
constexpr double kFs = 48000.0;

// Direct-form recursion written independently of the library's version.
std::vector<double> recursion(const std::vector<double>& x, const BiquadSection& s) {
  std::vector<double> y(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double xn1 = n >= 1 ? x[n - 1] : 0.0, xn2 = n >= 2 ? x[n - 2] : 0.0;
    const double yn1 = n >= 1 ? y[n - 1] : 0.0, yn2 = n >= 2 ? y[n - 2] : 0.0;
    y[n] = (s.b0 * x[n] + s.b1 * xn1 + s.b2 * xn2 - s.a1 * yn1 - s.a2 * yn2) / s.a0;
  }
  return y;
}

std::vector<double> run(const Processor<double>& p, const std::vector<double>& x, const std::vector<double>& g,
                        std::size_t block_size = 0) {
  Tape<double> t;
  t.set_grad_enabled(false);
  const V xv = t.constant(Tensor<double>({1, x.size()}, x));
  if (g.empty()) return p.process(xv, nullptr).value().storage();
  Shape gs = block_size ? Shape{g.size() / p.num_params(), p.num_params()} : Shape{g.size()};
  Controls<double> c{t.constant(Tensor<double>(gs, g)), block_size};
  return p.process(xv, &c).value().storage();
}

std::unique_ptr<Processor<double>> make(const std::string& kind) {
  Rng rng(1);
  return make_processor<double>({.kind = kind}, kFs, rng, kind);
}

TEST(Biquad, LowpassQuarterRate) {
  const auto s = biquad_coefficients({FilterKind::kLowpass, kFs / 4, 0.0, 1 / std::sqrt(2.0), kFs});
  EXPECT_NEAR(s.b0, 0.5, 1e-4);
  EXPECT_NEAR(s.b1, 1.0, 1e-4);
  EXPECT_NEAR(s.b2, 0.5, 1e-4);
  EXPECT_NEAR(s.a0, 1.7071, 1e-4);
  EXPECT_NEAR(s.a1, 0.0, 1e-4);
  EXPECT_NEAR(s.a2, 0.2929, 1e-4);
  EXPECT_NEAR(std::abs(frequency_response({s}, {0.0}, kFs)[0]), 1.0, 1e-12);
}

TEST(Biquad, PeakAtZeroGainIsIdentity) {
  for (double f : {50.0, 1000.0, 15000.0}) {
    const auto s = biquad_coefficients({FilterKind::kPeak, f, 0.0, 2.3, kFs});
    EXPECT_DOUBLE_EQ(s.b0, s.a0);
    EXPECT_DOUBLE_EQ(s.b1, s.a1);
    EXPECT_DOUBLE_EQ(s.b2, s.a2);
  }
}

TEST(Biquad, HighpassBlocksDc) {
  const auto s = biquad_coefficients({FilterKind::kHighpass, 300.0, 0.0, 0.9, kFs});
  EXPECT_NEAR(s.b0 + s.b1 + s.b2, 0.0, 1e-15);
}

TEST(Biquad, ShelvesReachTheirGain) {
  const auto lo = biquad_coefficients({FilterKind::kLowShelf, 500.0, 6.0, 0.7, kFs});
  const auto hi = biquad_coefficients({FilterKind::kHighShelf, 500.0, -9.0, 0.7, kFs});
  EXPECT_NEAR(20 * std::log10(std::abs(frequency_response({lo}, {0.0}, kFs)[0])), 6.0, 1e-9);
  EXPECT_NEAR(20 * std::log10(std::abs(frequency_response({lo}, {kFs / 2}, kFs)[0])), 0.0, 1e-9);
  EXPECT_NEAR(20 * std::log10(std::abs(frequency_response({hi}, {kFs / 2}, kFs)[0])), -9.0, 1e-9);
  EXPECT_NEAR(20 * std::log10(std::abs(frequency_response({hi}, {0.0}, kFs)[0])), 0.0, 1e-9);
}

TEST(Biquad, InvalidParametersRejected) {
  EXPECT_THROW(biquad_coefficients({FilterKind::kLowpass, kFs / 2, 0.0, 0.7, kFs}), InvalidArgument);
  EXPECT_THROW(biquad_coefficients({FilterKind::kLowpass, 100.0, 0.0, 0.0, kFs}), InvalidArgument);
}

TEST(Biquad, CascadeResponseIsProduct) {
  const auto a = biquad_coefficients({FilterKind::kPeak, 800.0, 5.0, 1.5, kFs});
  const auto b = biquad_coefficients({FilterKind::kHighShelf, 3000.0, -4.0, 0.8, kFs});
  const std::vector<double> f = {10.0, 100.0, 1000.0, 5000.0, 20000.0};
  const auto ha = frequency_response({a}, f, kFs);
  const auto hb = frequency_response({b}, f, kFs);
  const auto hab = frequency_response({a, b}, f, kFs);
  const auto haa = frequency_response({a, a}, f, kFs);
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_LT(std::abs(hab[i] - ha[i] * hb[i]), 1e-9);
    EXPECT_LT(std::abs(haa[i] - ha[i] * ha[i]), 1e-9);
  }
  EXPECT_LT(std::abs(frequency_response({BiquadSection{}}, f, kFs)[2] - 1.0), 1e-15);
}

TEST(Biquad, DifferentiableRowsMatchCookbook) {
  for (FilterKind k : {FilterKind::kLowpass, FilterKind::kHighpass, FilterKind::kLowShelf, FilterKind::kHighShelf,
                       FilterKind::kPeak}) {
    Tape<double> t;
    const V g = t.constant(Tensor<double>::vector({-7.5, 3.0}));
    const V f = t.constant(Tensor<double>::vector({150.0, 9000.0}));
    const V q = t.constant(Tensor<double>::vector({0.5, 4.0}));
    const V rows = biquad_rows(k, g, f, q, kFs);
    ASSERT_EQ(rows.shape(), (Shape{2, 6}));
    for (std::size_t r = 0; r < 2; ++r) {
      const auto s = biquad_coefficients({k, f.value()[r], g.value()[r], q.value()[r], kFs}).as_array();
      for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(rows.value().at(r, c), s[c], 1e-12) << filter_kind_name(k);
    }
  }
}

TEST(Filter, FrequencySamplingMatchesRecursion) {
  const auto x = test::uniform(4800, 11);
  const auto s = biquad_coefficients({FilterKind::kLowpass, 2000.0, 0.0, 0.9, kFs});
  Tape<double> t;
  const V y = apply_filter(t.constant(Tensor<double>::vector(x)),
                           t.constant(Tensor<double>({1, 6}, {s.b0, s.b1, s.b2, s.a0, s.a1, s.a2})),
                           fft_size_for(x.size()));
  EXPECT_LT(test::rel_l2(recursion(x, s), y.value().storage()), 1e-3);
  EXPECT_LT(test::rel_l2(filter_direct(x, {s}), y.value().storage()), 1e-3);
}

TEST(Filter, IdentitySectionPassesSignal) {
  const auto x = test::uniform(300, 3);
  Tape<double> t;
  const V y = apply_filter(t.constant(Tensor<double>::vector(x)), t.constant(Tensor<double>({1, 6}, {2, 0, 0, 2, 0, 0})),
                           fft_size_for(300));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y.value()[i], x[i], 1e-6);
}

TEST(Filter, FftSmallerThanSignalRejected) {
  Tape<double> t;
  EXPECT_THROW(apply_filter(t.constant(test::random_tensor({100}, 1)), t.constant(Tensor<double>({1, 6}, {1, 0, 0, 1, 0, 0})), 64),
               InvalidArgument);
}

TEST(Filter, FftSizeRule) {
  EXPECT_EQ(fft_size_for(48000), 524288u);
  EXPECT_EQ(fft_size_for(256), 2048u);
}

TEST(Params, Denormalize) {
  EXPECT_DOUBLE_EQ(denormalize(0.0, {20, 20000, RangeScale::kLog}), 20.0);
  EXPECT_NEAR(denormalize(1.0, {20, 20000, RangeScale::kLog}), 20000.0, 1e-9);
  EXPECT_NEAR(denormalize(0.5, {20, 20000, RangeScale::kLog}), 632.4555, 1e-4);
  EXPECT_DOUBLE_EQ(denormalize(0.25, {-1, 1, RangeScale::kLinear}), -0.5);
  EXPECT_DOUBLE_EQ(denormalize(1.5, {-1, 1, RangeScale::kLinear}), 1.0);
  EXPECT_NEAR(normalize(denormalize(0.3, q_range()), q_range()), 0.3, 1e-12);
  EXPECT_THROW(validate({1, 1, RangeScale::kLinear}), InvalidArgument);
  EXPECT_THROW(validate({0, 1, RangeScale::kLog}), InvalidArgument);
}

TEST(Processors, BasicOperators) {
  EXPECT_EQ(run(*make("phase_inversion"), {0.3, -0.2}, {}), (std::vector<double>{-0.3, 0.2}));
  // Chain gain range is [-40, 40] dB; u = 0.5 is 0 dB and u = 0.25 is -20 dB.
  EXPECT_EQ(run(*make("gain"), {0.3, -0.2}, {0.5}), (std::vector<double>{0.3, -0.2}));
  EXPECT_NEAR(run(*make("gain"), {1.0}, {0.25})[0], 0.1, 1e-15);
  EXPECT_EQ(run(*make("dc_offset"), {0.3, -0.2}, {0.5}), (std::vector<double>{0.3, -0.2}));
  EXPECT_NEAR(run(*make("dc_offset"), {0.3}, {0.75})[0], 0.8, 1e-15);
}

TEST(Processors, ParameterCounts) {
  EXPECT_EQ(make("parametric_eq")->num_params(), 15u);
  EXPECT_EQ(make("shelving_eq")->num_params(), 10u);
  EXPECT_EQ(make("lowpass")->num_params(), 2u);
  EXPECT_EQ(make("peak")->num_params(), 3u);
  EXPECT_EQ(make("tanh")->num_params(), 0u);
  Rng rng(1);
  EXPECT_THROW(make_processor<double>({.kind = "reverb"}, kFs, rng, "x"), InvalidArgument);
}

TEST(Processors, ZeroGainEqIsIdentity) {
  const auto x = test::uniform(1000, 5);
  auto peq = make("parametric_eq");
  // gains at u = 0.5 (0 dB), frequencies and Q anywhere.
  std::vector<double> g = {0.5, 0.2, 0.9, 0.5, 0.4, 0.1, 0.5, 0.6, 0.3, 0.5, 0.8, 0.7, 0.5, 0.95, 0.5};
  EXPECT_LT(test::rel_l2(x, run(*peq, x, g)), 1e-4);
  std::vector<double> physical;
  for (std::size_t i = 0; i < g.size(); ++i) physical.push_back(denormalize(g[i], peq->params()[i].range));
  const auto h = frequency_response(peq->sections(physical), {20.0, 440.0, 8000.0, 22000.0}, kFs);
  for (const auto& v : h) EXPECT_NEAR(20 * std::log10(std::abs(v)), 0.0, 1e-6);
}

TEST(Processors, ParametricEqResponseIsSectionProduct) {
  auto peq = make("parametric_eq");
  std::vector<double> phys = {3, 120, 0.7, -6, 400, 2, 4, 1500, 1, -2, 6000, 3, 5, 10000, 0.8};
  const auto secs = peq->sections(phys);
  ASSERT_EQ(secs.size(), 5u);
  const std::vector<double> f = {30, 300, 3000, 15000};
  auto prod = std::vector<std::complex<double>>(f.size(), 1.0);
  for (const auto& s : secs) {
    const auto h = frequency_response({s}, f, kFs);
    for (std::size_t i = 0; i < f.size(); ++i) prod[i] *= h[i];
  }
  const auto whole = frequency_response(secs, f, kFs);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_LT(std::abs(whole[i] - prod[i]), 1e-9);
  EXPECT_THROW(peq->sections({1.0, 2.0}), InvalidArgument);
}

TEST(Processors, ShelvingEqNearFlat) {
  auto seq = make("shelving_eq");
  // highpass at min frequency, shelves at 0 dB, lowpass at max frequency.
  const std::vector<double> u = {0.0, normalize(0.7071, q_range()), 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 1.0,
                                 normalize(0.7071, q_range())};
  std::vector<double> phys;
  for (std::size_t i = 0; i < u.size(); ++i) phys.push_back(denormalize(u[i], seq->params()[i].range));
  std::vector<double> f;
  for (double v = 100.0; v <= kFs / 4; v *= 1.1) f.push_back(v);
  for (const auto& h : frequency_response(seq->sections(phys), f, kFs)) {
    EXPECT_LT(std::abs(20 * std::log10(std::abs(h))), 0.5);
  }
}

TEST(Processors, TimeVaryingWithOneBlockEqualsStatic) {
  const auto x = test::uniform(256, 8);
  for (const char* kind : {"gain", "dc_offset", "peak", "shelving_eq"}) {
    auto p = make(kind);
    std::vector<double> g(p->num_params());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = 0.2 + 0.05 * double(i);
    const auto a = run(*p, x, g);
    const auto b = run(*p, x, g, x.size());
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_DOUBLE_EQ(a[i], b[i]) << kind;
  }
}

TEST(Processors, TimeVaryingBlocksUseTheirOwnParameters) {
  const auto x = test::uniform(200, 9);
  auto gain = make("gain");
  const auto y = run(*gain, x, {0.25, 0.5, 0.75}, 80);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double expect = x[i] * (i < 80 ? 0.1 : i < 160 ? 1.0 : 10.0);
    EXPECT_NEAR(y[i], expect, 1e-12);
  }
  // A filter block matches the static filter over the whole signal, restricted to that block.
  auto lp = make("lowpass");
  const auto tv = run(*lp, x, {0.3, 0.5, 0.7, 0.2}, 100);
  const auto first = run(*lp, x, {0.3, 0.5});
  const auto second = run(*lp, x, {0.7, 0.2});
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(tv[i], i < 100 ? first[i] : second[i], 1e-12);
}

TEST(Processors, FirDeltaAndDelay) {
  const auto x = test::uniform(50, 4);
  Tape<double> t;
  const V xv = t.constant(Tensor<double>({1, 50}, x));
  const auto id = fir_filter(xv, t.constant(Tensor<double>::vector({1, 0, 0, 0}))).value();
  const auto delay = fir_filter(xv, t.constant(Tensor<double>::vector({0, 1, 0, 0}))).value();
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_DOUBLE_EQ(id[i], x[i]);
    EXPECT_DOUBLE_EQ(delay[i], i == 0 ? 0.0 : x[i - 1]);
  }
}

TEST(Processors, StaticFirUsesSirenTaps) {
  Rng rng(3);
  StaticFir<double> fir("fir", 16, 8, 2, rng);
  Tape<double> t;
  const V taps = fir.taps(t);
  ASSERT_EQ(taps.shape(), (Shape{16}));
  const auto x = test::uniform(40, 2);
  const auto y = fir.process(t.constant(Tensor<double>({1, 40}, x)), nullptr).value();
  double y5 = 0;
  for (std::size_t i = 0; i <= 5; ++i) y5 += taps.value()[i] * x[5 - i];
  EXPECT_NEAR(y[5], y5, 1e-12);
}

TEST(Processors, RationalIdentityAndOrigin) {
  StaticRational<double> ident("r", false);
  const auto x = test::uniform(20, 6, -3, 3);
  EXPECT_EQ(run(ident, x, {}), x);
  StaticRational<double> fit("r", true);
  EXPECT_LT(std::abs(fit.numerator.value[0]), 1e-4);
  // Input is clamped to [-8, 8].
  EXPECT_DOUBLE_EQ(run(fit, {100.0}, {})[0], run(fit, {8.0}, {})[0]);
}

TEST(Processors, PrefitNonlinearitiesMatchOracle) {
  for (const char* kind : {"rational", "siren"}) {
    const Prefit& p = tanh_prefit(kind);
    ASSERT_EQ(p.oracle_x.size(), p.oracle_y.size());
    Rng rng(0);
    auto proc = make_processor<double>({.kind = std::string(kind) == "rational" ? "static_rational" : "static_mlp"},
                                       kFs, rng, kind);
    const auto y = run(*proc, p.oracle_x, {});
    double dev_oracle = 0, dev_tanh = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      dev_oracle = std::max(dev_oracle, std::abs(y[i] - p.oracle_y[i]));
      dev_tanh = std::max(dev_tanh, std::abs(y[i] - std::tanh(p.oracle_x[i])));
    }
    EXPECT_LT(dev_oracle, 1e-9) << kind;
    EXPECT_LE(dev_tanh, std::string(kind) == "rational" ? 1e-3 : 5e-3) << kind;
  }
}

TEST(Processors, MlpMonotoneNearOrigin) {
  auto mlp = make("static_mlp");
  const auto y = run(*mlp, {-1.0, 0.0, 1.0}, {});
  EXPECT_LT(y[0], y[1]);
  EXPECT_LT(y[1], y[2]);
}

// --- gradients -------------------------------------------------------------

double control_grad_error(const std::string& kind, std::size_t block_size, std::size_t len) {
  auto p = make(kind);
  const std::size_t blocks = block_size ? (len + block_size - 1) / block_size : 1;
  Shape gs = block_size ? Shape{blocks, p->num_params()} : Shape{p->num_params()};
  auto r = grad_check(
      [&](Tape<double>& t, std::span<const V> a) {
        Controls<double> c{a[1], block_size};
        const V w = t.constant(test::random_tensor({1, len}, 77, 0.5, 1.5));
        return sum(p->process(a[0], &c) * w);
      },
      {test::random_tensor({1, len}, 1), test::random_tensor(gs, 2, 0.2, 0.8)});
  return r.max_rel_error;
}

TEST(ProcessorGrad, ControlledProcessors) {
  for (const char* kind : {"gain", "dc_offset", "lowpass", "highpass", "lowshelf", "highshelf", "peak",
                           "parametric_eq", "shelving_eq"}) {
    EXPECT_LT(control_grad_error(kind, 0, 64), 1e-4) << kind;
  }
}

TEST(ProcessorGrad, TimeVaryingProcessors) {
  for (const char* kind : {"gain", "dc_offset", "peak"}) EXPECT_LT(control_grad_error(kind, 16, 40), 1e-4) << kind;
}

TEST(ProcessorGrad, TrainableProcessors) {
  Rng rng(5);
  for (const char* kind : {"static_fir", "static_mlp", "static_rational"}) {
    ProcessorConfig cfg{.kind = kind, .fir_taps = 8, .siren_hidden = 4, .siren_layers = 1};
    auto p = make_processor<double>(cfg, kFs, rng, kind);
    nn::ParamRefs<double> params;
    p->collect(params);
    ASSERT_FALSE(params.empty());
    const Tensor<double> x = test::random_tensor({1, 32}, 4, -2, 2);
    const auto r = grad_check(
        [&](Tape<double>& t) {
          return sum(p->process(t.constant(x), nullptr) * t.constant(test::random_tensor({1, 32}, 9, 0.5, 1.5)));
        },
        params);
    EXPECT_LT(r.max_rel_error, 1e-4) << kind << " worst " << r.analytic << " vs " << r.numeric;
    // And with respect to the input.
    const auto rx = grad_check([&](Tape<double>&, std::span<const V> a) { return sum(p->process(a[0], nullptr)); },
                               {x});
    EXPECT_LT(rx.max_rel_error, 1e-4) << kind;
  }
}

}  // namespace
}  // namespace deffx::dsp
