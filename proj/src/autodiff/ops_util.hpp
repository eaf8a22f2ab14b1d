#pragma once

// Shared helpers for the primitive implementations.

#include <cstddef>
#include <vector>

#include "deffx/autodiff/ops.hpp"
#include "deffx/autodiff/tensor.hpp"
#include "deffx/core/error.hpp"
#include "deffx/simd/kernels.hpp"

namespace deffx::detail {

// Strides of `shape` aligned to `rank` dims, zero where the (left-padded)
// extent is 1 but the output extent is not.
std::vector<std::size_t> broadcast_strides(const Shape& shape, const Shape& out);

// Calls f(out_offset, a_offset, b_offset, inner_len, a_inner_stride,
// b_inner_stride) once per innermost row of the broadcast output.
template <typename F>
void for_each_broadcast_row(const Shape& out, const std::vector<std::size_t>& sa,
                            const std::vector<std::size_t>& sb, F&& f) {
  const std::size_t rank = out.size();
  if (rank == 0) {
    f(std::size_t{0}, std::size_t{0}, std::size_t{0}, std::size_t{1}, std::size_t{0}, std::size_t{0});
    return;
  }
  const std::size_t inner = out.back();
  const std::size_t rows = inner == 0 ? 0 : numel(out) / inner;
  std::vector<std::size_t> idx(rank, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    f(r * inner, oa, ob, inner, sa[rank - 1], sb[rank - 1]);
    // Advance the odometer over the outer dims.
    for (std::size_t d = rank - 1; d-- > 0;) {
      ++idx[d];
      oa += sa[d];
      ob += sb[d];
      if (idx[d] < out[d]) break;
      oa -= sa[d] * out[d];
      ob -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

// slot += g summed down to slot's (broadcast-compatible) shape.
template <typename T>
void accumulate_reduced(Tensor<T>& slot, const Tensor<T>& g);

// Split a shape around `axis` into (outer, extent, inner) element counts.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};
AxisSplit split_axis(const Shape& shape, std::size_t axis);

template <typename T>
void add_into(Tensor<T>& slot, const Tensor<T>& g) {
  simd::kernels<T>().add(slot.ptr(), g.ptr(), slot.ptr(), slot.size());
}

}  // namespace deffx::detail

#define DEFFX_INSTANTIATE_FLOAT_DOUBLE(MACRO) \
  MACRO(float)                                \
  MACRO(double)
