#include "deffx/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernel_decls.hpp"

namespace deffx::simd {
namespace {

#define DEFFX_TABLE(ns, T) \
  KernelTable<T> { &detail::ns::add, &detail::ns::sub, &detail::ns::mul, &detail::ns::axpy, \
                   &detail::ns::mul_acc, &detail::ns::scale, &detail::ns::dot, &detail::ns::sum }

const KernelTable<float> kScalarF32 = DEFFX_TABLE(scalar_f32, float);
const KernelTable<double> kScalarF64 = DEFFX_TABLE(scalar_f64, double);
#if defined(DEFFX_HAVE_AVX2_TU)
const KernelTable<float> kAvx2F32 = DEFFX_TABLE(avx2_f32, float);
const KernelTable<double> kAvx2F64 = DEFFX_TABLE(avx2_f64, double);
#endif
#if defined(DEFFX_HAVE_NEON_TU)
const KernelTable<float> kNeonF32 = DEFFX_TABLE(neon_f32, float);
const KernelTable<double> kNeonF64 = DEFFX_TABLE(neon_f64, double);
#endif

Backend detect() {
  if (const char* env = std::getenv("DEFFX_SIMD")) {
    const std::string v(env);
    if (v == "scalar") return Backend::kScalar;
    if (v == "avx2" && backend_available(Backend::kAvx2)) return Backend::kAvx2;
    if (v == "neon" && backend_available(Backend::kNeon)) return Backend::kNeon;
  }
  if (backend_available(Backend::kAvx2)) return Backend::kAvx2;
  if (backend_available(Backend::kNeon)) return Backend::kNeon;
  return Backend::kScalar;
}

std::atomic<Backend>& active() {
  static std::atomic<Backend> backend{detect()};
  return backend;
}

}  // namespace

bool backend_available(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
#if defined(DEFFX_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::kNeon:
#if defined(DEFFX_HAVE_NEON_TU)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend active_backend() { return active().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (!backend_available(b)) {
    throw std::invalid_argument("SIMD backend not available: " + std::string(backend_name(b)));
  }
  active().store(b, std::memory_order_relaxed);
}

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::kScalar: return "scalar";
    case Backend::kAvx2: return "avx2";
    case Backend::kNeon: return "neon";
  }
  return "unknown";
}

template <>
const KernelTable<float>& kernels<float>(Backend b) {
  switch (b) {
#if defined(DEFFX_HAVE_AVX2_TU)
    case Backend::kAvx2:
      if (backend_available(b)) return kAvx2F32;
      break;
#endif
#if defined(DEFFX_HAVE_NEON_TU)
    case Backend::kNeon:
      return kNeonF32;
#endif
    case Backend::kScalar:
      return kScalarF32;
    default:
      break;
  }
  throw std::invalid_argument("SIMD backend not available: " + std::string(backend_name(b)));
}

template <>
const KernelTable<double>& kernels<double>(Backend b) {
  switch (b) {
#if defined(DEFFX_HAVE_AVX2_TU)
    case Backend::kAvx2:
      if (backend_available(b)) return kAvx2F64;
      break;
#endif
#if defined(DEFFX_HAVE_NEON_TU)
    case Backend::kNeon:
      return kNeonF64;
#endif
    case Backend::kScalar:
      return kScalarF64;
    default:
      break;
  }
  throw std::invalid_argument("SIMD backend not available: " + std::string(backend_name(b)));
}

template <>
const KernelTable<float>& kernels<float>() {
  return kernels<float>(active_backend());
}

template <>
const KernelTable<double>& kernels<double>() {
  return kernels<double>(active_backend());
}

}  // namespace deffx::simd
