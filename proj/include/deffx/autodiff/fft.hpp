#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace deffx::fft {

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

// In-place complex transform of power-of-two length. Forward uses e^{-i...};
// the inverse is unnormalized.
template <typename T>
void transform(std::span<std::complex<T>> data, bool inverse);

// Real-input forward transform. `in` holds n reals (n a power of two, n >= 2),
// `out` receives n/2 + 1 bins.
template <typename T>
void rfft(std::span<const T> in, std::span<std::complex<T>> out);

// Inverse of rfft, normalized by 1/n. Imaginary parts of the DC and Nyquist
// bins are ignored.
template <typename T>
void irfft(std::span<const std::complex<T>> in, std::span<T> out);

}  // namespace deffx::fft
