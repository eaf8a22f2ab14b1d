#pragma once

// Cookbook biquad design and frequency-sampling filtering.

#include <array>
#include <complex>
#include <cstddef>
#include <string_view>
#include <vector>

#include "deffx/autodiff/ops.hpp"

namespace deffx::dsp {

enum class FilterKind { kLowpass, kHighpass, kLowShelf, kHighShelf, kPeak };

std::string_view filter_kind_name(FilterKind kind);
// Number of physical parameters: 2 for lowpass/highpass, 3 otherwise.
std::size_t filter_param_count(FilterKind kind);

struct FilterParams {
  FilterKind kind = FilterKind::kLowpass;
  double f0 = 1000.0;
  double gain_db = 0.0;  // ignored by lowpass/highpass
  double q = 0.7071067811865476;
  double fs = 48000.0;
};

struct BiquadSection {
  double b0 = 1, b1 = 0, b2 = 0, a0 = 1, a1 = 0, a2 = 0;

  std::array<double, 6> as_array() const { return {b0, b1, b2, a0, a1, a2}; }
};

// Throws InvalidArgument unless 0 < f0 < fs/2 and Q > 0.
BiquadSection biquad_coefficients(const FilterParams& p);

// Product of section responses at each frequency (Hz).
std::vector<std::complex<double>> frequency_response(const std::vector<BiquadSection>& sections,
                                                     const std::vector<double>& freqs, double fs);

// Direct-form I recursion of the difference equation.
std::vector<double> filter_direct(const std::vector<double>& x, const std::vector<BiquadSection>& sections);

// Smallest power of two >= 8 * length.
std::size_t fft_size_for(std::size_t length);

// Differentiable coefficient rows. Each parameter is a [N] tensor (N blocks, or
// N = 1 for static parameters) in physical units; the result is [N, 6].
// `gain_db` is unused for lowpass/highpass and may be invalid.
template <typename T>
Var<T> biquad_rows(FilterKind kind, const Var<T>& gain_db, const Var<T>& f0, const Var<T>& q, double fs);

// Frequency-sampling filter: y = irfft(rfft(x, n) * H, n) truncated to the
// input length. x is [L] or [C, L]; coeffs is [K, 6].
template <typename T>
Var<T> apply_filter(const Var<T>& x, const Var<T>& coeffs, std::size_t fft_size);

// Time-varying variant: block b of the output is block b of x filtered with
// the cascade in coeffs[b] (a [K, 6] tensor per block). x is [1, L] and
// block_coeffs.size() == ceil(L / block_size).
template <typename T>
Var<T> apply_filter_blocks(const Var<T>& x, const std::vector<Var<T>>& block_coeffs, std::size_t block_size,
                           std::size_t fft_size);

}  // namespace deffx::dsp
