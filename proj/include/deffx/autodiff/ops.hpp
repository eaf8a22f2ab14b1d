#pragma once

// Differentiable primitives. Every model in the library is composed from the
// functions in this header; each records one node on the tape of its inputs.
//
// Binary elementwise ops broadcast numpy-style (shapes right-aligned, size-1
// axes stretch). Complex values are stored interleaved in a trailing axis of
// size 2: a spectrum with B bins has shape [..., B, 2].

#include <cstddef>
#include <type_traits>
#include <vector>

#include "deffx/autodiff/tape.hpp"

namespace deffx {

// --- elementwise arithmetic ------------------------------------------------
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> div(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> neg(const Var<T>& a);
template <typename T> Var<T> scale(const Var<T>& a, std::type_identity_t<T> factor);
template <typename T> Var<T> shift(const Var<T>& a, std::type_identity_t<T> offset);
template <typename T> Var<T> pow(const Var<T>& a, int exponent);

// --- elementwise functions -------------------------------------------------
template <typename T> Var<T> tanh(const Var<T>& a);
template <typename T> Var<T> sigmoid(const Var<T>& a);
template <typename T> Var<T> sin(const Var<T>& a);
template <typename T> Var<T> cos(const Var<T>& a);
template <typename T> Var<T> exp(const Var<T>& a);
template <typename T> Var<T> log(const Var<T>& a);
// Gradient taken as 0 at the origin.
template <typename T> Var<T> sqrt(const Var<T>& a);
// Subgradient 0 at the origin.
template <typename T> Var<T> abs(const Var<T>& a);
// Gradient passes where lo <= a <= hi.
template <typename T> Var<T> clamp(const Var<T>& a, std::type_identity_t<T> lo, std::type_identity_t<T> hi);
template <typename T> Var<T> maximum(const Var<T>& a, std::type_identity_t<T> floor);

// --- reductions --------------------------------------------------------------
template <typename T> Var<T> sum(const Var<T>& a);
template <typename T> Var<T> mean(const Var<T>& a);
// Reduces one axis, keeping it with size 1.
template <typename T> Var<T> sum(const Var<T>& a, std::size_t axis);
template <typename T> Var<T> mean(const Var<T>& a, std::size_t axis);

// --- shape -------------------------------------------------------------------
template <typename T> Var<T> reshape(const Var<T>& a, Shape shape);
template <typename T> Var<T> transpose(const Var<T>& a);  // rank 2
template <typename T> Var<T> slice(const Var<T>& a, std::size_t axis, std::size_t start, std::size_t length);
template <typename T> Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis);
// Tiles `a` `times` times along `axis`.
template <typename T> Var<T> repeat(const Var<T>& a, std::size_t axis, std::size_t times);

// --- linear algebra and convolution ---------------------------------------
// [M, K] x [K, N] -> [M, N]
template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
// x [Cin, L], w [Cout, Cin, K] -> [Cout, L + left_pad - (K - 1) * dilation].
// Stride 1; `left_pad` implicit zeros precede x. left_pad = (K - 1) * dilation
// gives a causal, length-preserving convolution in which output n depends
// only on inputs <= n.
template <typename T> Var<T> conv1d(const Var<T>& x, const Var<T>& w, std::size_t dilation, std::size_t left_pad);

// --- temporal resampling ([C, L] signals, blocks along the last axis) -------
// Blocks of `block` samples; a partial final block is zero-padded.
template <typename T> Var<T> max_pool1d(const Var<T>& a, std::size_t block);
template <typename T> Var<T> avg_pool1d(const Var<T>& a, std::size_t block);
// [C, N] -> [C, length] with out[c, t] = a[c, t / factor] (zero-order hold).
template <typename T> Var<T> upsample_nearest1d(const Var<T>& a, std::size_t factor, std::size_t length);
// [L] -> [F, frame] with F = (L - frame) / hop + 1.
template <typename T> Var<T> frame(const Var<T>& a, std::size_t frame_length, std::size_t hop);

// --- spectral --------------------------------------------------------------
// Real FFT over the last axis, zero-padding it to n: [..., L] -> [..., n/2+1, 2].
template <typename T> Var<T> rfft(const Var<T>& a, std::size_t n);
// Inverse of rfft: [..., n/2+1, 2] -> [..., n].
template <typename T> Var<T> irfft(const Var<T>& a, std::size_t n);
// Complex product. `b` may omit leading axes of `a` (broadcast over them).
template <typename T> Var<T> cmul(const Var<T>& a, const Var<T>& b);
// |z| floored at `floor`: [..., 2] -> [...]. Gradient is zero where floored.
template <typename T> Var<T> cabs(const Var<T>& a, std::type_identity_t<T> floor);
// Product of biquad transfer functions on the rfft grid of size n.
// coeffs: [K, 6] rows (b0, b1, b2, a0, a1, a2) -> [n/2+1, 2].
template <typename T> Var<T> biquad_response(const Var<T>& coeffs, std::size_t n);

// --- convenience -----------------------------------------------------------
template <typename T> Var<T> operator+(const Var<T>& a, const Var<T>& b) { return add(a, b); }
template <typename T> Var<T> operator-(const Var<T>& a, const Var<T>& b) { return sub(a, b); }
template <typename T> Var<T> operator*(const Var<T>& a, const Var<T>& b) { return mul(a, b); }
template <typename T> Var<T> operator/(const Var<T>& a, const Var<T>& b) { return div(a, b); }
template <typename T> Var<T> operator-(const Var<T>& a) { return neg(a); }
template <typename T> Var<T> operator*(const Var<T>& a, std::type_identity_t<T> s) { return scale(a, s); }
template <typename T> Var<T> operator*(std::type_identity_t<T> s, const Var<T>& a) { return scale(a, s); }
template <typename T> Var<T> operator+(const Var<T>& a, std::type_identity_t<T> s) { return shift(a, s); }
template <typename T> Var<T> operator+(std::type_identity_t<T> s, const Var<T>& a) { return shift(a, s); }
template <typename T> Var<T> operator-(const Var<T>& a, std::type_identity_t<T> s) { return shift(a, -s); }
template <typename T> Var<T> operator-(std::type_identity_t<T> s, const Var<T>& a) { return shift(neg(a), s); }

// Constant on the same tape as `like`.
template <typename T>
Var<T> constant_like(const Var<T>& like, Tensor<T> value) {
  return like.tape().constant(std::move(value));
}

// Shape after numpy-style broadcasting; throws InvalidArgument if incompatible.
Shape broadcast_shapes(const Shape& a, const Shape& b);

}  // namespace deffx
