#include <algorithm>
#include <cmath>
#include <limits>

#include "ops_util.hpp"

namespace deffx {

using detail::AxisSplit;
using detail::split_axis;

template <typename T>
Var<T> sum(const Var<T>& a) {
  const NodeId ia = a.id();
  const T s = simd::kernels<T>().sum(a.value().ptr(), a.size());
  return a.tape().record(Tensor<T>::scalar(s), {a}, [ia](Tape<T>& t, const Tensor<T>&, const Tensor<T>& g) {
    Tensor<T>& slot = t.grad_slot(ia);
    const T gv = g[0];
    for (auto& v : slot.data()) v += gv;
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  if (a.size() == 0) throw InvalidArgument("mean of empty tensor");
  return scale(sum(a), T(1) / static_cast<T>(a.size()));
}

template <typename T>
Var<T> sum(const Var<T>& a, std::size_t axis) {
  const AxisSplit s = split_axis(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape[axis] = 1;
  Tensor<T> out(out_shape);
  const T* src = a.value().ptr();
  const auto& k = simd::kernels<T>();
  for (std::size_t o = 0; o < s.outer; ++o) {
    T* dst = out.ptr() + o * s.inner;
    for (std::size_t e = 0; e < s.extent; ++e) {
      const T* row = src + (o * s.extent + e) * s.inner;
      if (s.inner == 1) {
        dst[0] += row[0];
      } else {
        k.add(dst, row, dst, s.inner);
      }
    }
  }
  if (s.inner == 1 && s.extent > 1) {
    // Contiguous reduction: recompute with the vector kernel for accuracy.
    for (std::size_t o = 0; o < s.outer; ++o) out[o] = k.sum(src + o * s.extent, s.extent);
  }
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, s](Tape<T>& t, const Tensor<T>&, const Tensor<T>& g) {
    Tensor<T>& slot = t.grad_slot(ia);
    const auto& kk = simd::kernels<T>();
    for (std::size_t o = 0; o < s.outer; ++o) {
      const T* grow = g.ptr() + o * s.inner;
      for (std::size_t e = 0; e < s.extent; ++e) {
        T* dst = slot.ptr() + (o * s.extent + e) * s.inner;
        kk.add(dst, grow, dst, s.inner);
      }
    }
  });
}

template <typename T>
Var<T> mean(const Var<T>& a, std::size_t axis) {
  const std::size_t n = a.shape().at(axis);
  if (n == 0) throw InvalidArgument("mean over empty axis");
  return scale(sum(a, axis), T(1) / static_cast<T>(n));
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  const NodeId ia = a.id();
  return a.tape().record(a.value().reshaped(std::move(shape)), {a},
                         [ia](Tape<T>& t, const Tensor<T>&, const Tensor<T>& g) {
                           Tensor<T>& slot = t.grad_slot(ia);
                           simd::kernels<T>().add(slot.ptr(), g.ptr(), slot.ptr(), g.size());
                         });
}

template <typename T>
Var<T> transpose(const Var<T>& a) {
  if (a.shape().size() != 2) throw InvalidArgument("transpose expects rank 2, got " + to_string(a.shape()));
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  Tensor<T> out(Shape{cols, rows});
  const Tensor<T>& x = a.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = x[r * cols + c];
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, rows, cols](Tape<T>& t, const Tensor<T>&, const Tensor<T>& g) {
    Tensor<T>& slot = t.grad_slot(ia);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) slot[r * cols + c] += g[c * rows + r];
  });
}

template <typename T>
Var<T> slice(const Var<T>& a, std::size_t axis, std::size_t start, std::size_t length) {
  const AxisSplit s = split_axis(a.shape(), axis);
  if (start + length > s.extent) {
    throw InvalidArgument("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                          ") out of range for axis of size " + std::to_string(s.extent));
  }
  Shape out_shape = a.shape();
  out_shape[axis] = length;
  Tensor<T> out(out_shape);
  const T* src = a.value().ptr();
  const std::size_t chunk = length * s.inner;
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(src + (o * s.extent + start) * s.inner, chunk, out.ptr() + o * chunk);
  }
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, s, start, chunk](Tape<T>& t, const Tensor<T>&, const Tensor<T>& g) {
                           Tensor<T>& slot = t.grad_slot(ia);
                           const auto& k = simd::kernels<T>();
                           for (std::size_t o = 0; o < s.outer; ++o) {
                             T* dst = slot.ptr() + (o * s.extent + start) * s.inner;
                             k.add(dst, g.ptr() + o * chunk, dst, chunk);
                           }
                         });
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw InvalidArgument("concat of zero tensors");
  const Shape& first = parts.front().shape();
  Shape out_shape = first;
  out_shape.at(axis) = 0;
  std::vector<std::size_t> extents;
  for (const auto& p : parts) {
    const Shape& sh = p.shape();
    if (sh.size() != first.size()) throw InvalidArgument("concat rank mismatch");
    for (std::size_t d = 0; d < sh.size(); ++d) {
      if (d != axis && sh[d] != first[d]) {
        throw InvalidArgument("concat shape mismatch: " + to_string(sh) + " vs " + to_string(first));
      }
    }
    extents.push_back(sh[axis]);
    out_shape[axis] += sh[axis];
  }
  const AxisSplit os = split_axis(out_shape, axis);
  Tensor<T> out(out_shape);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const T* src = parts[p].value().ptr();
    const std::size_t chunk = extents[p] * os.inner;
    for (std::size_t o = 0; o < os.outer; ++o) {
      std::copy_n(src + o * chunk, chunk, out.ptr() + (o * os.extent + offset) * os.inner);
    }
    offset += extents[p];
  }
  std::vector<NodeId> ids;
  for (const auto& p : parts) ids.push_back(p.id());
  return parts.front().tape().record(
      std::move(out), parts, [ids, extents, os](Tape<T>& t, const Tensor<T>&, const Tensor<T>& g) {
        std::size_t off = 0;
        const auto& k = simd::kernels<T>();
        for (std::size_t p = 0; p < ids.size(); ++p) {
          const std::size_t chunk = extents[p] * os.inner;
          if (t.requires_grad(ids[p])) {
            Tensor<T>& slot = t.grad_slot(ids[p]);
            for (std::size_t o = 0; o < os.outer; ++o) {
              k.add(slot.ptr() + o * chunk, g.ptr() + (o * os.extent + off) * os.inner, slot.ptr() + o * chunk,
                    chunk);
            }
          }
          off += extents[p];
        }
      });
}

template <typename T>
Var<T> repeat(const Var<T>& a, std::size_t axis, std::size_t times) {
  if (times == 0) throw InvalidArgument("repeat count must be positive");
  const AxisSplit s = split_axis(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape[axis] *= times;
  Tensor<T> out(out_shape);
  const std::size_t chunk = s.extent * s.inner;
  const T* src = a.value().ptr();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t r = 0; r < times; ++r) std::copy_n(src + o * chunk, chunk, out.ptr() + (o * times + r) * chunk);
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, s, times, chunk](Tape<T>& t, const Tensor<T>&, const Tensor<T>& g) {
    Tensor<T>& slot = t.grad_slot(ia);
    const auto& k = simd::kernels<T>();
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t r = 0; r < times; ++r)
        k.add(slot.ptr() + o * chunk, g.ptr() + (o * times + r) * chunk, slot.ptr() + o * chunk, chunk);
  });
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.dim(1) != b.dim(0)) {
    throw InvalidArgument("matmul shape mismatch: " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), kd = a.dim(1), n = b.dim(1);
  Tensor<T> out(Shape{m, n});
  const T* pa = a.value().ptr();
  const T* pb = b.value().ptr();
  const auto& k = simd::kernels<T>();
  if (n == 1) {
    for (std::size_t i = 0; i < m; ++i) out[i] = k.dot(pa + i * kd, pb, kd);
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      T* row = out.ptr() + i * n;
      for (std::size_t j = 0; j < kd; ++j) k.axpy(pa[i * kd + j], pb + j * n, row, n);
    }
  }
  const NodeId ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib, m, kd, n](Tape<T>& t, const Tensor<T>&, const Tensor<T>& g) {
    const auto& kk = simd::kernels<T>();
    const T* pa2 = t.value(ia).ptr();
    const T* pb2 = t.value(ib).ptr();
    if (t.requires_grad(ia)) {
      // dA = G B^T
      T* da = t.grad_slot(ia).ptr();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < kd; ++j) da[i * kd + j] += kk.dot(g.ptr() + i * n, pb2 + j * n, n);
    }
    if (t.requires_grad(ib)) {
      // dB = A^T G
      T* db = t.grad_slot(ib).ptr();
      if (n == 1) {
        for (std::size_t i = 0; i < m; ++i) kk.axpy(g[i], pa2 + i * kd, db, kd);
      } else {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < kd; ++j) kk.axpy(pa2[i * kd + j], g.ptr() + i * n, db + j * n, n);
      }
    }
  });
}

template <typename T>
Var<T> conv1d(const Var<T>& x, const Var<T>& w, std::size_t dilation, std::size_t left_pad) {
  if (x.shape().size() != 2 || w.shape().size() != 3 || w.dim(1) != x.dim(0)) {
    throw InvalidArgument("conv1d shape mismatch: x " + to_string(x.shape()) + ", w " + to_string(w.shape()));
  }
  if (dilation == 0) throw InvalidArgument("conv1d dilation must be >= 1");
  const std::size_t cin = x.dim(0), len = x.dim(1);
  const std::size_t cout = w.dim(0), kw = w.dim(2);
  const std::size_t span = (kw - 1) * dilation;
  if (len + left_pad < span + 1) {
    throw InvalidArgument("conv1d input too short for kernel span");
  }
  const std::size_t out_len = len + left_pad - span;
  Tensor<T> out(Shape{cout, out_len});
  const T* px = x.value().ptr();
  const T* pw = w.value().ptr();
  const auto& k = simd::kernels<T>();
  // Output t reads input t + j*dilation - left_pad for tap j.
  auto range = [=](std::size_t j, std::size_t& t0, std::size_t& t1, std::ptrdiff_t& shift) {
    shift = static_cast<std::ptrdiff_t>(j * dilation) - static_cast<std::ptrdiff_t>(left_pad);
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(out_len),
                                                       static_cast<std::ptrdiff_t>(len) - shift);
    t0 = static_cast<std::size_t>(lo);
    t1 = static_cast<std::size_t>(std::max(lo, hi));
  };
  for (std::size_t o = 0; o < cout; ++o) {
    T* orow = out.ptr() + o * out_len;
    for (std::size_t i = 0; i < cin; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        std::size_t t0, t1;
        std::ptrdiff_t sh;
        range(j, t0, t1, sh);
        if (t1 > t0) k.axpy(pw[(o * cin + i) * kw + j], px + i * len + static_cast<std::ptrdiff_t>(t0) + sh, orow + t0, t1 - t0);
      }
    }
  }
  const NodeId ix = x.id(), iw = w.id();
  return x.tape().record(std::move(out), {x, w},
                         [=](Tape<T>& t, const Tensor<T>&, const Tensor<T>& g) {
                           const auto& kk = simd::kernels<T>();
                           const T* xv = t.value(ix).ptr();
                           const T* wv = t.value(iw).ptr();
                           T* gx = t.requires_grad(ix) ? t.grad_slot(ix).ptr() : nullptr;
                           T* gw = t.requires_grad(iw) ? t.grad_slot(iw).ptr() : nullptr;
                           for (std::size_t o = 0; o < cout; ++o) {
                             const T* grow = g.ptr() + o * out_len;
                             for (std::size_t i = 0; i < cin; ++i) {
                               for (std::size_t j = 0; j < kw; ++j) {
                                 std::size_t t0, t1;
                                 std::ptrdiff_t sh;
                                 range(j, t0, t1, sh);
                                 if (t1 <= t0) continue;
                                 const std::size_t widx = (o * cin + i) * kw + j;
                                 const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(i * len + t0) + sh;
                                 if (gw) gw[widx] += kk.dot(grow + t0, xv + base, t1 - t0);
                                 if (gx) kk.axpy(wv[widx], grow + t0, gx + base, t1 - t0);
                               }
                             }
                           }
                         });
}

template <typename T>
Var<T> max_pool1d(const Var<T>& a, std::size_t block) {
  if (a.shape().size() != 2 || block == 0) throw InvalidArgument("max_pool1d expects [C, L] and block >= 1");
  const std::size_t ch = a.dim(0), len = a.dim(1);
  const std::size_t nb = (len + block - 1) / block;
  Tensor<T> out(Shape{ch, nb});
  // Index of the winning sample, or -1 where a padding zero won.
  std::vector<std::ptrdiff_t> arg(ch * nb, -1);
  const T* src = a.value().ptr();
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t b = 0; b < nb; ++b) {
      const std::size_t t0 = b * block, t1 = std::min(len, t0 + block);
      T best = -std::numeric_limits<T>::infinity();
      std::ptrdiff_t where = -1;
      for (std::size_t t = t0; t < t1; ++t) {
        if (src[c * len + t] > best) {
          best = src[c * len + t];
          where = static_cast<std::ptrdiff_t>(c * len + t);
        }
      }
      if (t1 - t0 < block && best < T(0)) {
        best = T(0);
        where = -1;
      }
      out[c * nb + b] = best;
      arg[c * nb + b] = where;
    }
  }
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, arg = std::move(arg)](Tape<T>& t, const Tensor<T>&, const Tensor<T>& g) {
                           Tensor<T>& slot = t.grad_slot(ia);
                           for (std::size_t i = 0; i < arg.size(); ++i) {
                             if (arg[i] >= 0) slot[static_cast<std::size_t>(arg[i])] += g[i];
                           }
                         });
}

template <typename T>
Var<T> avg_pool1d(const Var<T>& a, std::size_t block) {
  if (a.shape().size() != 2 || block == 0) throw InvalidArgument("avg_pool1d expects [C, L] and block >= 1");
  const std::size_t ch = a.dim(0), len = a.dim(1);
  const std::size_t nb = (len + block - 1) / block;
  Tensor<T> out(Shape{ch, nb});
  const T* src = a.value().ptr();
  const T inv = T(1) / static_cast<T>(block);
  const auto& k = simd::kernels<T>();
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t b = 0; b < nb; ++b) {
      const std::size_t t0 = b * block, t1 = std::min(len, t0 + block);
      out[c * nb + b] = k.sum(src + c * len + t0, t1 - t0) * inv;
    }
  }
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, ch, len, nb, block, inv](Tape<T>& t, const Tensor<T>&, const Tensor<T>& g) {
                           Tensor<T>& slot = t.grad_slot(ia);
                           for (std::size_t c = 0; c < ch; ++c) {
                             for (std::size_t b = 0; b < nb; ++b) {
                               const std::size_t t0 = b * block, t1 = std::min(len, t0 + block);
                               const T gv = g[c * nb + b] * inv;
                               for (std::size_t s = t0; s < t1; ++s) slot[c * len + s] += gv;
                             }
                           }
                         });
}

template <typename T>
Var<T> upsample_nearest1d(const Var<T>& a, std::size_t factor, std::size_t length) {
  if (a.shape().size() != 2 || factor == 0) throw InvalidArgument("upsample expects [C, N] and factor >= 1");
  const std::size_t ch = a.dim(0), n = a.dim(1);
  if (length > 0 && (length - 1) / factor >= n) {
    throw InvalidArgument("upsample target length " + std::to_string(length) + " exceeds " + std::to_string(n) +
                          " blocks of " + std::to_string(factor));
  }
  Tensor<T> out(Shape{ch, length});
  const T* src = a.value().ptr();
  for (std::size_t c = 0; c < ch; ++c)
    for (std::size_t t = 0; t < length; ++t) out[c * length + t] = src[c * n + t / factor];
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, ch, n, factor, length](Tape<T>& t, const Tensor<T>&, const Tensor<T>& g) {
                           Tensor<T>& slot = t.grad_slot(ia);
                           for (std::size_t c = 0; c < ch; ++c)
                             for (std::size_t s = 0; s < length; ++s) slot[c * n + s / factor] += g[c * length + s];
                         });
}

template <typename T>
Var<T> frame(const Var<T>& a, std::size_t frame_length, std::size_t hop) {
  if (a.shape().size() != 1 || hop == 0 || frame_length == 0) {
    throw InvalidArgument("frame expects a rank-1 signal, hop >= 1 and frame >= 1");
  }
  const std::size_t len = a.dim(0);
  if (len < frame_length) {
    throw InvalidArgument("signal of length " + std::to_string(len) + " shorter than frame " +
                          std::to_string(frame_length));
  }
  const std::size_t frames = (len - frame_length) / hop + 1;
  Tensor<T> out(Shape{frames, frame_length});
  const T* src = a.value().ptr();
  for (std::size_t f = 0; f < frames; ++f) std::copy_n(src + f * hop, frame_length, out.ptr() + f * frame_length);
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, frames, frame_length, hop](Tape<T>& t, const Tensor<T>&, const Tensor<T>& g) {
                           Tensor<T>& slot = t.grad_slot(ia);
                           const auto& k = simd::kernels<T>();
                           for (std::size_t f = 0; f < frames; ++f) {
                             k.add(slot.ptr() + f * hop, g.ptr() + f * frame_length, slot.ptr() + f * hop,
                                   frame_length);
                           }
                         });
}

#define DEFFX_INSTANTIATE(T)                                                               \
  template Var<T> sum<T>(const Var<T>&);                                                   \
  template Var<T> mean<T>(const Var<T>&);                                                  \
  template Var<T> sum<T>(const Var<T>&, std::size_t);                                      \
  template Var<T> mean<T>(const Var<T>&, std::size_t);                                     \
  template Var<T> reshape<T>(const Var<T>&, Shape);                                        \
  template Var<T> transpose<T>(const Var<T>&);                                             \
  template Var<T> slice<T>(const Var<T>&, std::size_t, std::size_t, std::size_t);          \
  template Var<T> concat<T>(const std::vector<Var<T>>&, std::size_t);                      \
  template Var<T> repeat<T>(const Var<T>&, std::size_t, std::size_t);                      \
  template Var<T> matmul<T>(const Var<T>&, const Var<T>&);                                 \
  template Var<T> conv1d<T>(const Var<T>&, const Var<T>&, std::size_t, std::size_t);       \
  template Var<T> max_pool1d<T>(const Var<T>&, std::size_t);                               \
  template Var<T> avg_pool1d<T>(const Var<T>&, std::size_t);                               \
  template Var<T> upsample_nearest1d<T>(const Var<T>&, std::size_t, std::size_t);          \
  template Var<T> frame<T>(const Var<T>&, std::size_t, std::size_t);

DEFFX_INSTANTIATE_FLOAT_DOUBLE(DEFFX_INSTANTIATE)

}  // namespace deffx
