#pragma once

// Raw kernel entry points for each instruction set. This header is included
// by the ISA-specific translation units, which are compiled with extra
// target flags; it must stay free of anything that could emit inline code.

#include <cstddef>

#define DEFFX_DECLARE_KERNELS(ns, T)                                        \
  namespace ns {                                                            \
  void add(const T* a, const T* b, T* out, std::size_t n);                 \
  void sub(const T* a, const T* b, T* out, std::size_t n);                 \
  void mul(const T* a, const T* b, T* out, std::size_t n);                 \
  void axpy(T alpha, const T* x, T* y, std::size_t n);                     \
  void mul_acc(const T* a, const T* b, T* out, std::size_t n);             \
  void scale(T alpha, const T* x, T* out, std::size_t n);                  \
  T dot(const T* a, const T* b, std::size_t n);                            \
  T sum(const T* a, std::size_t n);                                        \
  }

namespace deffx::simd::detail {
DEFFX_DECLARE_KERNELS(scalar_f32, float)
DEFFX_DECLARE_KERNELS(scalar_f64, double)
#if defined(__x86_64__) || defined(_M_X64)
#define DEFFX_HAVE_AVX2_TU 1
DEFFX_DECLARE_KERNELS(avx2_f32, float)
DEFFX_DECLARE_KERNELS(avx2_f64, double)
#endif
#if defined(__aarch64__)
#define DEFFX_HAVE_NEON_TU 1
DEFFX_DECLARE_KERNELS(neon_f32, float)
DEFFX_DECLARE_KERNELS(neon_f64, double)
#endif
}  // namespace deffx::simd::detail
