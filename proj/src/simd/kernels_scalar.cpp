#include "kernel_decls.hpp"

namespace deffx::simd::detail {
namespace {

template <typename T>
void add_impl(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void sub_impl(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

template <typename T>
void mul_impl(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void axpy_impl(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void mul_acc_impl(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += a[i] * b[i];
}

template <typename T>
void scale_impl(T alpha, const T* x, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

template <typename T>
T dot_impl(const T* a, const T* b, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
T sum_impl(const T* a, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

}  // namespace

#define DEFFX_DEFINE_SCALAR(ns, T)                                                          \
  namespace ns {                                                                            \
  void add(const T* a, const T* b, T* out, std::size_t n) { add_impl(a, b, out, n); }       \
  void sub(const T* a, const T* b, T* out, std::size_t n) { sub_impl(a, b, out, n); }       \
  void mul(const T* a, const T* b, T* out, std::size_t n) { mul_impl(a, b, out, n); }       \
  void axpy(T alpha, const T* x, T* y, std::size_t n) { axpy_impl(alpha, x, y, n); }        \
  void mul_acc(const T* a, const T* b, T* out, std::size_t n) { mul_acc_impl(a, b, out, n); } \
  void scale(T alpha, const T* x, T* out, std::size_t n) { scale_impl(alpha, x, out, n); }  \
  T dot(const T* a, const T* b, std::size_t n) { return dot_impl(a, b, n); }                \
  T sum(const T* a, std::size_t n) { return sum_impl(a, n); }                               \
  }

DEFFX_DEFINE_SCALAR(scalar_f32, float)
DEFFX_DEFINE_SCALAR(scalar_f64, double)

}  // namespace deffx::simd::detail
