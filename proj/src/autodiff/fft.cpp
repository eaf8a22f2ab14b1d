#include "deffx/autodiff/fft.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include "deffx/core/error.hpp"

namespace deffx::fft {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

namespace {

// Twiddles and bit-reversal permutation for one complex size.
template <typename T>
struct Plan {
  std::size_t n = 0;
  std::vector<std::complex<T>> twiddle;  // e^{-2 pi i k / n}, k < n/2
  std::vector<std::uint32_t> bitrev;
  // Post-processing twiddles for the packed real transform of length 2n:
  // e^{-2 pi i k / (2n)}, k <= n.
  std::vector<std::complex<T>> real_twiddle;
};

template <typename T>
std::shared_ptr<const Plan<T>> make_plan(std::size_t n) {
  auto plan = std::make_shared<Plan<T>>();
  plan->n = n;
  plan->twiddle.resize(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    plan->twiddle[k] = {static_cast<T>(std::cos(a)), static_cast<T>(std::sin(a))};
  }
  plan->bitrev.resize(n);
  unsigned bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t r = 0;
    for (unsigned b = 0; b < bits; ++b) {
      if (i & (std::size_t{1} << b)) r |= 1u << (bits - 1 - b);
    }
    plan->bitrev[i] = r;
  }
  plan->real_twiddle.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const double a = -std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    plan->real_twiddle[k] = {static_cast<T>(std::cos(a)), static_cast<T>(std::sin(a))};
  }
  return plan;
}

template <typename T>
std::shared_ptr<const Plan<T>> get_plan(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::shared_ptr<const Plan<T>>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = make_plan<T>(n);
  return slot;
}

template <typename T>
void run(const Plan<T>& plan, std::complex<T>* x, bool inverse) {
  const std::size_t n = plan.n;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = plan.bitrev[i];
    if (i < j) std::swap(x[i], x[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        std::complex<T> w = plan.twiddle[k * step];
        if (inverse) w = std::conj(w);
        const std::complex<T> u = x[start + k];
        const std::complex<T> v = x[start + k + half] * w;
        x[start + k] = u + v;
        x[start + k + half] = u - v;
      }
    }
  }
}

void check_size(std::size_t n) {
  if (n < 2 || !is_power_of_two(n)) {
    throw InvalidArgument("FFT size must be a power of two >= 2, got " + std::to_string(n));
  }
}

}  // namespace

template <typename T>
void transform(std::span<std::complex<T>> data, bool inverse) {
  if (data.size() <= 1) return;
  check_size(data.size());
  run(*get_plan<T>(data.size()), data.data(), inverse);
}

template <typename T>
void rfft(std::span<const T> in, std::span<std::complex<T>> out) {
  const std::size_t n = in.size();
  check_size(n);
  if (out.size() != n / 2 + 1) throw InvalidArgument("rfft output must have n/2+1 bins");
  const std::size_t m = n / 2;
  std::vector<std::complex<T>> z(m);
  for (std::size_t k = 0; k < m; ++k) z[k] = {in[2 * k], in[2 * k + 1]};
  const auto plan = get_plan<T>(m);
  if (m > 1) run(*plan, z.data(), false);
  const T half = T(0.5);
  for (std::size_t k = 0; k <= m; ++k) {
    const std::complex<T> zk = z[k % m];
    const std::complex<T> zc = std::conj(z[(m - k) % m]);
    const std::complex<T> even = (zk + zc) * half;
    const std::complex<T> odd = (zk - zc) * std::complex<T>(0, -half);
    out[k] = even + plan->real_twiddle[k] * odd;
  }
}

template <typename T>
void irfft(std::span<const std::complex<T>> in, std::span<T> out) {
  const std::size_t n = out.size();
  check_size(n);
  if (in.size() != n / 2 + 1) throw InvalidArgument("irfft input must have n/2+1 bins");
  const std::size_t m = n / 2;
  const auto plan = get_plan<T>(m);
  std::vector<std::complex<T>> z(m);
  auto bin = [&](std::size_t k) {
    std::complex<T> v = in[k];
    if (k == 0 || k == m) v.imag(0);
    return v;
  };
  const T half = T(0.5);
  for (std::size_t k = 0; k < m; ++k) {
    const std::complex<T> xk = bin(k);
    const std::complex<T> xc = std::conj(bin(m - k));
    const std::complex<T> even = (xk + xc) * half;
    const std::complex<T> odd = (xk - xc) * half * std::conj(plan->real_twiddle[k]);
    z[k] = even + std::complex<T>(0, 1) * odd;
  }
  if (m > 1) run(*plan, z.data(), true);
  const T scale = T(1) / static_cast<T>(m);
  for (std::size_t k = 0; k < m; ++k) {
    out[2 * k] = z[k].real() * scale;
    out[2 * k + 1] = z[k].imag() * scale;
  }
}

template void transform<float>(std::span<std::complex<float>>, bool);
template void transform<double>(std::span<std::complex<double>>, bool);
template void rfft<float>(std::span<const float>, std::span<std::complex<float>>);
template void rfft<double>(std::span<const double>, std::span<std::complex<double>>);
template void irfft<float>(std::span<const std::complex<float>>, std::span<float>);
template void irfft<double>(std::span<const std::complex<double>>, std::span<double>);

}  // namespace deffx::fft
