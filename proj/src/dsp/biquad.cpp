#include "deffx/dsp/biquad.hpp"

#include <cmath>
#include <numbers>

#include "../autodiff/ops_util.hpp"
#include "deffx/autodiff/fft.hpp"

namespace deffx::dsp {

std::string_view filter_kind_name(FilterKind kind) {
  switch (kind) {
    case FilterKind::kLowpass: return "lowpass";
    case FilterKind::kHighpass: return "highpass";
    case FilterKind::kLowShelf: return "lowshelf";
    case FilterKind::kHighShelf: return "highshelf";
    case FilterKind::kPeak: return "peak";
  }
  return "unknown";
}

std::size_t filter_param_count(FilterKind kind) {
  return kind == FilterKind::kLowpass || kind == FilterKind::kHighpass ? 2 : 3;
}

BiquadSection biquad_coefficients(const FilterParams& p) {
  if (!(p.f0 > 0.0 && p.f0 < p.fs / 2.0)) {
    throw InvalidArgument("filter frequency " + std::to_string(p.f0) + " Hz outside (0, fs/2)");
  }
  if (!(p.q > 0.0)) throw InvalidArgument("filter Q must be positive");
  const double w0 = 2.0 * std::numbers::pi * p.f0 / p.fs;
  const double cw = std::cos(w0);
  const double alpha = std::sin(w0) / (2.0 * p.q);
  const double a = std::pow(10.0, p.gain_db / 40.0);
  const double sa = std::sqrt(a);
  BiquadSection s;
  switch (p.kind) {
    case FilterKind::kLowpass:
      s = {(1 - cw) / 2, 1 - cw, (1 - cw) / 2, 1 + alpha, -2 * cw, 1 - alpha};
      break;
    case FilterKind::kHighpass:
      s = {(1 + cw) / 2, -(1 + cw), (1 + cw) / 2, 1 + alpha, -2 * cw, 1 - alpha};
      break;
    case FilterKind::kLowShelf:
      s = {a * ((a + 1) - (a - 1) * cw + 2 * sa * alpha),
           2 * a * ((a - 1) - (a + 1) * cw),
           a * ((a + 1) - (a - 1) * cw - 2 * sa * alpha),
           (a + 1) + (a - 1) * cw + 2 * sa * alpha,
           -2 * ((a - 1) + (a + 1) * cw),
           (a + 1) + (a - 1) * cw - 2 * sa * alpha};
      break;
    case FilterKind::kHighShelf:
      s = {a * ((a + 1) + (a - 1) * cw + 2 * sa * alpha),
           -2 * a * ((a - 1) + (a + 1) * cw),
           a * ((a + 1) + (a - 1) * cw - 2 * sa * alpha),
           (a + 1) - (a - 1) * cw + 2 * sa * alpha,
           2 * ((a - 1) - (a + 1) * cw),
           (a + 1) - (a - 1) * cw - 2 * sa * alpha};
      break;
    case FilterKind::kPeak:
      s = {1 + alpha * a, -2 * cw, 1 - alpha * a, 1 + alpha / a, -2 * cw, 1 - alpha / a};
      break;
  }
  return s;
}

std::vector<std::complex<double>> frequency_response(const std::vector<BiquadSection>& sections,
                                                     const std::vector<double>& freqs, double fs) {
  if (sections.empty()) throw InvalidArgument("frequency_response needs at least one section");
  std::vector<std::complex<double>> out;
  out.reserve(freqs.size());
  for (double f : freqs) {
    const std::complex<double> z1 = std::polar(1.0, -2.0 * std::numbers::pi * f / fs);
    const std::complex<double> z2 = z1 * z1;
    std::complex<double> h(1.0);
    for (const auto& s : sections) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (s.a0 + s.a1 * z1 + s.a2 * z2);
    out.push_back(h);
  }
  return out;
}

std::vector<double> filter_direct(const std::vector<double>& x, const std::vector<BiquadSection>& sections) {
  std::vector<double> y = x;
  for (const auto& s : sections) {
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (double& v : y) {
      const double in = v;
      const double out = (s.b0 * in + s.b1 * x1 + s.b2 * x2 - s.a1 * y1 - s.a2 * y2) / s.a0;
      x2 = x1;
      x1 = in;
      y2 = y1;
      y1 = out;
      v = out;
    }
  }
  return y;
}

std::size_t fft_size_for(std::size_t length) { return fft::next_power_of_two(std::max<std::size_t>(8 * length, 2)); }

template <typename T>
Var<T> biquad_rows(FilterKind kind, const Var<T>& gain_db, const Var<T>& f0, const Var<T>& q, double fs) {
  const std::size_t n = f0.size();
  auto col = [n](const Var<T>& v) { return reshape(v, {n, 1}); };
  const Var<T> w0 = scale(f0, static_cast<T>(2.0 * std::numbers::pi / fs));
  const Var<T> cw = cos(w0);
  const Var<T> alpha = sin(w0) / scale(q, T(2));
  std::vector<Var<T>> c;
  switch (kind) {
    case FilterKind::kLowpass:
    case FilterKind::kHighpass: {
      const bool lp = kind == FilterKind::kLowpass;
      const Var<T> b0 = lp ? scale(shift(neg(cw), T(1)), T(0.5)) : scale(shift(cw, T(1)), T(0.5));
      const Var<T> b1 = lp ? scale(b0, T(2)) : scale(b0, T(-2));
      c = {b0, b1, b0, shift(alpha, T(1)), scale(cw, T(-2)), shift(neg(alpha), T(1))};
      break;
    }
    case FilterKind::kPeak: {
      const Var<T> a = exp(scale(gain_db, static_cast<T>(std::numbers::ln10 / 40.0)));
      const Var<T> aa = alpha * a;
      const Var<T> ad = alpha / a;
      const Var<T> m2c = scale(cw, T(-2));
      c = {shift(aa, T(1)), m2c, shift(neg(aa), T(1)), shift(ad, T(1)), m2c, shift(neg(ad), T(1))};
      break;
    }
    case FilterKind::kLowShelf:
    case FilterKind::kHighShelf: {
      const T sign = kind == FilterKind::kLowShelf ? T(1) : T(-1);
      const Var<T> a = exp(scale(gain_db, static_cast<T>(std::numbers::ln10 / 40.0)));
      const Var<T> sa = exp(scale(gain_db, static_cast<T>(std::numbers::ln10 / 80.0)));
      const Var<T> ap1 = shift(a, T(1));
      const Var<T> am1 = shift(a, T(-1));
      const Var<T> am1c = am1 * cw;
      const Var<T> ap1c = ap1 * cw;
      const Var<T> k = scale(sa * alpha, T(2));
      // Low shelf takes the upper signs, high shelf the lower.
      const Var<T> nb = ap1 - scale(am1c, sign);
      const Var<T> da = ap1 + scale(am1c, sign);
      c = {a * (nb + k),
           scale(a * (am1 - scale(ap1c, sign)), 2 * sign),
           a * (nb - k),
           da + k,
           scale(am1 + scale(ap1c, sign), -2 * sign),
           da - k};
      break;
    }
  }
  for (auto& v : c) v = col(v);
  return concat(c, 1);
}

template <typename T>
Var<T> apply_filter(const Var<T>& x, const Var<T>& coeffs, std::size_t fft_size) {
  const std::size_t len = x.shape().back();
  if (fft_size < len) {
    throw InvalidArgument("fft size " + std::to_string(fft_size) + " shorter than signal length " + std::to_string(len));
  }
  const Var<T> y = irfft(cmul(rfft(x, fft_size), biquad_response(coeffs, fft_size)), fft_size);
  return slice(y, y.shape().size() - 1, 0, len);
}

template <typename T>
Var<T> apply_filter_blocks(const Var<T>& x, const std::vector<Var<T>>& block_coeffs, std::size_t block_size,
                           std::size_t fft_size) {
  if (x.shape().size() != 2 || block_size == 0) throw InvalidArgument("apply_filter_blocks expects [C, L]");
  const std::size_t len = x.dim(1);
  const std::size_t blocks = (len + block_size - 1) / block_size;
  if (block_coeffs.size() != blocks) {
    throw InvalidArgument("expected " + std::to_string(blocks) + " coefficient blocks, got " +
                          std::to_string(block_coeffs.size()));
  }
  if (fft_size < len) throw InvalidArgument("fft size shorter than signal");
  if (blocks == 1) return apply_filter(x, block_coeffs.front(), fft_size);
  const Var<T> spectrum = rfft(x, fft_size);
  std::vector<Var<T>> parts;
  parts.reserve(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t start = b * block_size;
    const Var<T> y = irfft(cmul(spectrum, biquad_response(block_coeffs[b], fft_size)), fft_size);
    parts.push_back(slice(y, 1, start, std::min(block_size, len - start)));
  }
  return concat(parts, 1);
}

#define DEFFX_INSTANTIATE(T)                                                                                  \
  template Var<T> biquad_rows<T>(FilterKind, const Var<T>&, const Var<T>&, const Var<T>&, double);            \
  template Var<T> apply_filter<T>(const Var<T>&, const Var<T>&, std::size_t);                                 \
  template Var<T> apply_filter_blocks<T>(const Var<T>&, const std::vector<Var<T>>&, std::size_t, std::size_t);

DEFFX_INSTANTIATE_FLOAT_DOUBLE(DEFFX_INSTANTIATE)

}  // namespace deffx::dsp
