#pragma once

// Flat-array arithmetic kernels used by the tensor primitives.
//
// Every kernel has a scalar reference implementation. Vectorized variants
// (AVX2+FMA on x86-64, NEON on AArch64) are compiled into separate
// translation units and selected once at startup from the CPU feature set.
// The DEFFX_SIMD environment variable ("scalar", "avx2", "neon") overrides
// the automatic choice.

#include <cstddef>
#include <string_view>

namespace deffx::simd {

enum class Backend { kScalar, kAvx2, kNeon };

template <typename T>
struct KernelTable {
  // out = a + b, a - b, a * b
  void (*add)(const T* a, const T* b, T* out, std::size_t n);
  void (*sub)(const T* a, const T* b, T* out, std::size_t n);
  void (*mul)(const T* a, const T* b, T* out, std::size_t n);
  // y += alpha * x
  void (*axpy)(T alpha, const T* x, T* y, std::size_t n);
  // out += a * b
  void (*mul_acc)(const T* a, const T* b, T* out, std::size_t n);
  // out = alpha * x
  void (*scale)(T alpha, const T* x, T* out, std::size_t n);
  T (*dot)(const T* a, const T* b, std::size_t n);
  T (*sum)(const T* a, std::size_t n);
};

bool backend_available(Backend b);
Backend active_backend();
// Throws std::invalid_argument if the backend is not available on this CPU.
void set_backend(Backend b);
std::string_view backend_name(Backend b);

template <typename T>
const KernelTable<T>& kernels();

template <typename T>
const KernelTable<T>& kernels(Backend b);

}  // namespace deffx::simd
