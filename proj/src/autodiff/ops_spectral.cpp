#include <cmath>
#include <complex>
#include <memory>
#include <numbers>

#include "deffx/autodiff/fft.hpp"
#include "ops_util.hpp"

namespace deffx {

namespace {

template <typename T>
std::complex<T>* as_complex(T* p) {
  return reinterpret_cast<std::complex<T>*>(p);
}
template <typename T>
const std::complex<T>* as_complex(const T* p) {
  return reinterpret_cast<const std::complex<T>*>(p);
}

void require_fft_size(std::size_t n) {
  if (n < 2 || !fft::is_power_of_two(n)) {
    throw InvalidArgument("fft size must be a power of two >= 2, got " + std::to_string(n));
  }
}

}  // namespace

template <typename T>
Var<T> rfft(const Var<T>& a, std::size_t n) {
  require_fft_size(n);
  const Shape& in_shape = a.shape();
  if (in_shape.empty()) throw InvalidArgument("rfft of a scalar");
  const std::size_t len = in_shape.back();
  if (len > n) {
    throw InvalidArgument("rfft size " + std::to_string(n) + " shorter than signal length " + std::to_string(len));
  }
  const std::size_t rows = len == 0 ? 0 : a.size() / len;
  const std::size_t bins = n / 2 + 1;
  Shape out_shape(in_shape.begin(), in_shape.end() - 1);
  out_shape.push_back(bins);
  out_shape.push_back(2);
  Tensor<T> out(out_shape);
  std::vector<T> buf(n);
  for (std::size_t r = 0; r < rows; ++r) {
    std::fill(buf.begin(), buf.end(), T(0));
    std::copy_n(a.value().ptr() + r * len, len, buf.begin());
    fft::rfft<T>(buf, {as_complex(out.ptr() + r * bins * 2), bins});
  }
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, n, len, rows, bins](Tape<T>& t, const Tensor<T>&, const Tensor<T>& g) {
    Tensor<T>& slot = t.grad_slot(ia);
    std::vector<std::complex<T>> spec(bins);
    std::vector<T> time(n);
    const T nn = static_cast<T>(n);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::complex<T>* gr = as_complex(g.ptr() + r * bins * 2);
      for (std::size_t k = 0; k < bins; ++k) spec[k] = (k == 0 || k == bins - 1) ? gr[k] : gr[k] * T(0.5);
      fft::irfft<T>(spec, time);
      T* dst = slot.ptr() + r * len;
      for (std::size_t i = 0; i < len; ++i) dst[i] += nn * time[i];
    }
  });
}

template <typename T>
Var<T> irfft(const Var<T>& a, std::size_t n) {
  require_fft_size(n);
  const Shape& in_shape = a.shape();
  const std::size_t bins = n / 2 + 1;
  if (in_shape.size() < 2 || in_shape.back() != 2 || in_shape[in_shape.size() - 2] != bins) {
    throw InvalidArgument("irfft of size " + std::to_string(n) + " expects [..., " + std::to_string(bins) +
                          ", 2], got " + to_string(in_shape));
  }
  const std::size_t rows = a.size() / (bins * 2);
  Shape out_shape(in_shape.begin(), in_shape.end() - 2);
  out_shape.push_back(n);
  Tensor<T> out(out_shape);
  for (std::size_t r = 0; r < rows; ++r) {
    fft::irfft<T>({as_complex(a.value().ptr() + r * bins * 2), bins}, {out.ptr() + r * n, n});
  }
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, n, rows, bins](Tape<T>& t, const Tensor<T>&, const Tensor<T>& g) {
    Tensor<T>& slot = t.grad_slot(ia);
    std::vector<std::complex<T>> spec(bins);
    const T inv = T(1) / static_cast<T>(n);
    for (std::size_t r = 0; r < rows; ++r) {
      fft::rfft<T>({g.ptr() + r * n, n}, spec);
      std::complex<T>* dst = as_complex(slot.ptr() + r * bins * 2);
      dst[0] += std::complex<T>(spec[0].real() * inv, T(0));
      dst[bins - 1] += std::complex<T>(spec[bins - 1].real() * inv, T(0));
      for (std::size_t k = 1; k + 1 < bins; ++k) dst[k] += spec[k] * (T(2) * inv);
    }
  });
}

template <typename T>
Var<T> cmul(const Var<T>& a, const Var<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.empty() || sa.back() != 2 || sb.empty() || sb.back() != 2 || sb.size() > sa.size() ||
      !std::equal(sb.begin(), sb.end(), sa.end() - static_cast<std::ptrdiff_t>(sb.size()))) {
    throw InvalidArgument("cmul shape mismatch: " + to_string(sa) + " and " + to_string(sb));
  }
  const std::size_t inner = b.size() / 2;
  const std::size_t outer = inner == 0 ? 0 : a.size() / b.size();
  Tensor<T> out(sa);
  const std::complex<T>* pa = as_complex(a.value().ptr());
  const std::complex<T>* pb = as_complex(b.value().ptr());
  std::complex<T>* po = as_complex(out.ptr());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) po[o * inner + i] = pa[o * inner + i] * pb[i];
  const NodeId ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib, outer, inner](Tape<T>& t, const Tensor<T>&, const Tensor<T>& g) {
    const std::complex<T>* gg = as_complex(g.ptr());
    const std::complex<T>* va = as_complex(t.value(ia).ptr());
    const std::complex<T>* vb = as_complex(t.value(ib).ptr());
    if (t.requires_grad(ia)) {
      std::complex<T>* da = as_complex(t.grad_slot(ia).ptr());
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) da[o * inner + i] += gg[o * inner + i] * std::conj(vb[i]);
    }
    if (t.requires_grad(ib)) {
      std::complex<T>* db = as_complex(t.grad_slot(ib).ptr());
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i) db[i] += gg[o * inner + i] * std::conj(va[o * inner + i]);
    }
  });
}

template <typename T>
Var<T> cabs(const Var<T>& a, std::type_identity_t<T> floor) {
  const Shape& sa = a.shape();
  if (sa.empty() || sa.back() != 2) throw InvalidArgument("cabs expects a trailing axis of 2, got " + to_string(sa));
  Shape out_shape(sa.begin(), sa.end() - 1);
  const std::size_t m = a.size() / 2;
  Tensor<T> out(out_shape);
  const T* p = a.value().ptr();
  for (std::size_t i = 0; i < m; ++i) out[i] = std::max(std::hypot(p[2 * i], p[2 * i + 1]), floor);
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, m, floor](Tape<T>& t, const Tensor<T>& out, const Tensor<T>& g) {
    Tensor<T>& slot = t.grad_slot(ia);
    const T* p2 = t.value(ia).ptr();
    for (std::size_t i = 0; i < m; ++i) {
      const T mag = out[i];
      if (!(mag > floor) || mag == T(0)) continue;
      const T s = g[i] / mag;
      slot[2 * i] += s * p2[2 * i];
      slot[2 * i + 1] += s * p2[2 * i + 1];
    }
  });
}

template <typename T>
Var<T> biquad_response(const Var<T>& coeffs, std::size_t n) {
  require_fft_size(n);
  const Shape& sc = coeffs.shape();
  if (sc.size() != 2 || sc[1] != 6 || sc[0] == 0) {
    throw InvalidArgument("biquad_response expects [K, 6] coefficients, got " + to_string(sc));
  }
  const std::size_t sections = sc[0];
  const std::size_t bins = n / 2 + 1;
  using C = std::complex<T>;
  const T* c = coeffs.value().ptr();
  for (std::size_t k = 0; k < sections; ++k) {
    if (c[k * 6 + 3] == T(0)) throw InvalidArgument("biquad section with a0 == 0");
  }
  // Per-bin section values are kept for the backward pass.
  auto hk = std::make_shared<std::vector<C>>(bins * sections);
  auto dk = std::make_shared<std::vector<C>>(bins * sections);
  Tensor<T> out(Shape{bins, 2});
  C* po = as_complex(out.ptr());
  const double step = 2.0 * std::numbers::pi / static_cast<double>(n);
  for (std::size_t j = 0; j < bins; ++j) {
    const double w = step * static_cast<double>(j);
    const C z1(static_cast<T>(std::cos(w)), static_cast<T>(-std::sin(w)));
    const C z2(static_cast<T>(std::cos(2 * w)), static_cast<T>(-std::sin(2 * w)));
    C h(1);
    for (std::size_t k = 0; k < sections; ++k) {
      const T* s = c + k * 6;
      const C num = s[0] + s[1] * z1 + s[2] * z2;
      const C den = s[3] + s[4] * z1 + s[5] * z2;
      const C hs = num / den;
      (*hk)[j * sections + k] = hs;
      (*dk)[j * sections + k] = den;
      h *= hs;
    }
    po[j] = h;
  }
  const NodeId ic = coeffs.id();
  return coeffs.tape().record(
      std::move(out), {coeffs}, [ic, sections, bins, step, hk, dk](Tape<T>& t, const Tensor<T>& out, const Tensor<T>& g) {
        Tensor<T>& slot = t.grad_slot(ic);
        const C* gg = as_complex(g.ptr());
        const C* hh = as_complex(out.ptr());
        std::vector<C> prefix(sections + 1), suffix(sections + 1);
        std::vector<double> acc(sections * 6, 0.0);
        for (std::size_t j = 0; j < bins; ++j) {
          const double w = step * static_cast<double>(j);
          const C z1(static_cast<T>(std::cos(w)), static_cast<T>(-std::sin(w)));
          const C z2(static_cast<T>(std::cos(2 * w)), static_cast<T>(-std::sin(2 * w)));
          const C* hs = hk->data() + j * sections;
          const C* ds = dk->data() + j * sections;
          prefix[0] = C(1);
          for (std::size_t k = 0; k < sections; ++k) prefix[k + 1] = prefix[k] * hs[k];
          suffix[sections] = C(1);
          for (std::size_t k = sections; k-- > 0;) suffix[k] = suffix[k + 1] * hs[k];
          const C gc = std::conj(gg[j]);
          for (std::size_t k = 0; k < sections; ++k) {
            // dH/db_m = others * z^-m / D, dH/da_m = -H * z^-m / D.
            const C bb = gc * prefix[k] * suffix[k + 1] / ds[k];
            const C aa = -gc * hh[j] / ds[k];
            double* a6 = acc.data() + k * 6;
            a6[0] += bb.real();
            a6[1] += (bb * z1).real();
            a6[2] += (bb * z2).real();
            a6[3] += aa.real();
            a6[4] += (aa * z1).real();
            a6[5] += (aa * z2).real();
          }
        }
        for (std::size_t i = 0; i < acc.size(); ++i) slot[i] += static_cast<T>(acc[i]);
      });
}

#define DEFFX_INSTANTIATE(T)                                            \
  template Var<T> rfft<T>(const Var<T>&, std::size_t);                  \
  template Var<T> irfft<T>(const Var<T>&, std::size_t);                 \
  template Var<T> cmul<T>(const Var<T>&, const Var<T>&);                \
  template Var<T> cabs<T>(const Var<T>&, std::type_identity_t<T>);      \
  template Var<T> biquad_response<T>(const Var<T>&, std::size_t);

DEFFX_INSTANTIATE_FLOAT_DOUBLE(DEFFX_INSTANTIATE)

}  // namespace deffx
