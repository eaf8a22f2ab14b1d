#include <algorithm>
#include <cmath>

#include "ops_util.hpp"

namespace deffx {

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw InvalidArgument("cannot broadcast " + to_string(a) + " with " + to_string(b));
    }
    out[i] = da == 1 ? db : da;
  }
  return out;
}

namespace detail {

std::vector<std::size_t> broadcast_strides(const Shape& shape, const Shape& out) {
  const std::size_t rank = out.size();
  std::vector<std::size_t> strides(rank, 0);
  std::size_t stride = 1;
  for (std::size_t i = rank; i-- > 0;) {
    const std::size_t k = rank - 1 - i;
    if (k >= shape.size()) break;
    const std::size_t extent = shape[shape.size() - 1 - k];
    strides[i] = (extent == 1 && out[i] != 1) ? 0 : stride;
    stride *= extent;
  }
  return strides;
}

template <typename T>
void accumulate_reduced(Tensor<T>& slot, const Tensor<T>& g) {
  if (slot.shape() == g.shape()) {
    add_into(slot, g);
    return;
  }
  const auto ss = broadcast_strides(slot.shape(), g.shape());
  const std::vector<std::size_t> unit = broadcast_strides(g.shape(), g.shape());
  const auto& k = simd::kernels<T>();
  T* dst = slot.ptr();
  const T* src = g.ptr();
  for_each_broadcast_row(g.shape(), unit, ss,
                         [&](std::size_t o, std::size_t, std::size_t os, std::size_t n, std::size_t,
                             std::size_t sstride) {
                           if (sstride == 1) {
                             k.add(dst + os, src + o, dst + os, n);
                           } else {
                             dst[os] += k.sum(src + o, n);
                           }
                         });
}

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw InvalidArgument("axis " + std::to_string(axis) + " out of range for shape " + to_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template void accumulate_reduced<float>(Tensor<float>&, const Tensor<float>&);
template void accumulate_reduced<double>(Tensor<double>&, const Tensor<double>&);

}  // namespace detail

namespace {

using detail::accumulate_reduced;
using detail::for_each_broadcast_row;

enum class BinOp { kAdd, kSub, kMul, kDiv };

template <typename T>
Tensor<T> broadcast_binary(const Tensor<T>& a, const Tensor<T>& b, BinOp op) {
  const Shape out_shape = broadcast_shapes(a.shape(), b.shape());
  Tensor<T> out(out_shape);
  const auto& k = simd::kernels<T>();
  if (a.shape() == b.shape()) {
    switch (op) {
      case BinOp::kAdd: k.add(a.ptr(), b.ptr(), out.ptr(), out.size()); return out;
      case BinOp::kSub: k.sub(a.ptr(), b.ptr(), out.ptr(), out.size()); return out;
      case BinOp::kMul: k.mul(a.ptr(), b.ptr(), out.ptr(), out.size()); return out;
      case BinOp::kDiv:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] / b[i];
        return out;
    }
  }
  const auto sa = detail::broadcast_strides(a.shape(), out_shape);
  const auto sb = detail::broadcast_strides(b.shape(), out_shape);
  const T* pa = a.ptr();
  const T* pb = b.ptr();
  T* po = out.ptr();
  for_each_broadcast_row(out_shape, sa, sb,
                         [&](std::size_t o, std::size_t ia, std::size_t ib, std::size_t n, std::size_t da,
                             std::size_t db) {
                           if (da == 1 && db == 1 && op != BinOp::kDiv) {
                             if (op == BinOp::kAdd) k.add(pa + ia, pb + ib, po + o, n);
                             if (op == BinOp::kSub) k.sub(pa + ia, pb + ib, po + o, n);
                             if (op == BinOp::kMul) k.mul(pa + ia, pb + ib, po + o, n);
                             return;
                           }
                           if (da == 1 && db == 0 && op == BinOp::kMul) {
                             k.scale(pb[ib], pa + ia, po + o, n);
                             return;
                           }
                           for (std::size_t j = 0; j < n; ++j) {
                             const T x = pa[ia + j * da];
                             const T y = pb[ib + j * db];
                             switch (op) {
                               case BinOp::kAdd: po[o + j] = x + y; break;
                               case BinOp::kSub: po[o + j] = x - y; break;
                               case BinOp::kMul: po[o + j] = x * y; break;
                               case BinOp::kDiv: po[o + j] = x / y; break;
                             }
                           }
                         });
  return out;
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  const NodeId ia = a.id(), ib = b.id();
  return a.tape().record(broadcast_binary(a.value(), b.value(), BinOp::kAdd), {a, b},
                         [ia, ib](Tape<T>& t, const Tensor<T>&, const Tensor<T>& g) {
                           if (t.requires_grad(ia)) accumulate_reduced(t.grad_slot(ia), g);
                           if (t.requires_grad(ib)) accumulate_reduced(t.grad_slot(ib), g);
                         });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  const NodeId ia = a.id(), ib = b.id();
  return a.tape().record(broadcast_binary(a.value(), b.value(), BinOp::kSub), {a, b},
                         [ia, ib](Tape<T>& t, const Tensor<T>&, const Tensor<T>& g) {
                           if (t.requires_grad(ia)) accumulate_reduced(t.grad_slot(ia), g);
                           if (t.requires_grad(ib)) {
                             Tensor<T> ng(g.shape());
                             simd::kernels<T>().scale(T(-1), g.ptr(), ng.ptr(), g.size());
                             accumulate_reduced(t.grad_slot(ib), ng);
                           }
                         });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  const NodeId ia = a.id(), ib = b.id();
  return a.tape().record(broadcast_binary(a.value(), b.value(), BinOp::kMul), {a, b},
                         [ia, ib](Tape<T>& t, const Tensor<T>&, const Tensor<T>& g) {
                           if (t.requires_grad(ia)) {
                             accumulate_reduced(t.grad_slot(ia), broadcast_binary(g, t.value(ib), BinOp::kMul));
                           }
                           if (t.requires_grad(ib)) {
                             accumulate_reduced(t.grad_slot(ib), broadcast_binary(g, t.value(ia), BinOp::kMul));
                           }
                         });
}

template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
  const NodeId ia = a.id(), ib = b.id();
  return a.tape().record(broadcast_binary(a.value(), b.value(), BinOp::kDiv), {a, b},
                         [ia, ib](Tape<T>& t, const Tensor<T>& out, const Tensor<T>& g) {
                           const Tensor<T>& bv = t.value(ib);
                           const Tensor<T> g_over_b = broadcast_binary(g, bv, BinOp::kDiv);
                           if (t.requires_grad(ia)) accumulate_reduced(t.grad_slot(ia), g_over_b);
                           if (t.requires_grad(ib)) {
                             // d(a/b)/db = -(a/b) / b
                             Tensor<T> term = broadcast_binary(g_over_b, out, BinOp::kMul);
                             for (auto& v : term.data()) v = -v;
                             accumulate_reduced(t.grad_slot(ib), term);
                           }
                         });
}

template <typename T>
Var<T> neg(const Var<T>& a) {
  return scale(a, T(-1));
}

template <typename T>
Var<T> scale(const Var<T>& a, std::type_identity_t<T> factor) {
  const NodeId ia = a.id();
  Tensor<T> out(a.shape());
  simd::kernels<T>().scale(factor, a.value().ptr(), out.ptr(), out.size());
  return a.tape().record(std::move(out), {a}, [ia, factor](Tape<T>& t, const Tensor<T>&, const Tensor<T>& g) {
    Tensor<T>& slot = t.grad_slot(ia);
    simd::kernels<T>().axpy(factor, g.ptr(), slot.ptr(), g.size());
  });
}

template <typename T>
Var<T> shift(const Var<T>& a, std::type_identity_t<T> offset) {
  const NodeId ia = a.id();
  Tensor<T> out(a.value());
  for (auto& v : out.data()) v += offset;
  return a.tape().record(std::move(out), {a}, [ia](Tape<T>& t, const Tensor<T>&, const Tensor<T>& g) {
    detail::add_into(t.grad_slot(ia), g);
  });
}

namespace {

// Elementwise map with derivative d(out)/d(in) computed from (in, out).
template <typename T, typename F, typename D>
Var<T> map_unary(const Var<T>& a, F forward, D derivative) {
  const Tensor<T>& x = a.value();
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = forward(x[i]);
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, derivative](Tape<T>& t, const Tensor<T>& y, const Tensor<T>& g) {
                           const Tensor<T>& xin = t.value(ia);
                           Tensor<T>& slot = t.grad_slot(ia);
                           for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * derivative(xin[i], y[i]);
                         });
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
Var<T> pow(const Var<T>& a, int exponent) {
  return map_unary(
      a, [exponent](T x) { return static_cast<T>(std::pow(x, exponent)); },
      [exponent](T x, T) { return exponent == 0 ? T(0) : static_cast<T>(exponent * std::pow(x, exponent - 1)); });
}

template <typename T>
Var<T> tanh(const Var<T>& a) {
  return map_unary(a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  return map_unary(a, [](T x) { return stable_sigmoid(x); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> sin(const Var<T>& a) {
  return map_unary(a, [](T x) { return std::sin(x); }, [](T x, T) { return std::cos(x); });
}

template <typename T>
Var<T> cos(const Var<T>& a) {
  return map_unary(a, [](T x) { return std::cos(x); }, [](T x, T) { return -std::sin(x); });
}

template <typename T>
Var<T> exp(const Var<T>& a) {
  return map_unary(a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> log(const Var<T>& a) {
  return map_unary(a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
Var<T> sqrt(const Var<T>& a) {
  return map_unary(a, [](T x) { return std::sqrt(x); },
                   [](T, T y) { return y > T(0) ? T(0.5) / y : T(0); });
}

template <typename T>
Var<T> abs(const Var<T>& a) {
  return map_unary(a, [](T x) { return std::abs(x); },
                   [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Var<T> clamp(const Var<T>& a, std::type_identity_t<T> lo, std::type_identity_t<T> hi) {
  if (!(lo <= hi)) throw InvalidArgument("clamp requires lo <= hi");
  return map_unary(a, [lo, hi](T x) { return std::clamp(x, lo, hi); },
                   [lo, hi](T x, T) { return (x >= lo && x <= hi) ? T(1) : T(0); });
}

template <typename T>
Var<T> maximum(const Var<T>& a, std::type_identity_t<T> floor) {
  return map_unary(a, [floor](T x) { return std::max(x, floor); },
                   [floor](T x, T) { return x >= floor ? T(1) : T(0); });
}

#define DEFFX_INSTANTIATE(T)                                                      \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                           \
  template Var<T> sub<T>(const Var<T>&, const Var<T>&);                           \
  template Var<T> mul<T>(const Var<T>&, const Var<T>&);                           \
  template Var<T> div<T>(const Var<T>&, const Var<T>&);                           \
  template Var<T> neg<T>(const Var<T>&);                                          \
  template Var<T> scale<T>(const Var<T>&, std::type_identity_t<T>);               \
  template Var<T> shift<T>(const Var<T>&, std::type_identity_t<T>);               \
  template Var<T> pow<T>(const Var<T>&, int);                                     \
  template Var<T> tanh<T>(const Var<T>&);                                         \
  template Var<T> sigmoid<T>(const Var<T>&);                                      \
  template Var<T> sin<T>(const Var<T>&);                                          \
  template Var<T> cos<T>(const Var<T>&);                                          \
  template Var<T> exp<T>(const Var<T>&);                                          \
  template Var<T> log<T>(const Var<T>&);                                          \
  template Var<T> sqrt<T>(const Var<T>&);                                         \
  template Var<T> abs<T>(const Var<T>&);                                          \
  template Var<T> clamp<T>(const Var<T>&, std::type_identity_t<T>, std::type_identity_t<T>); \
  template Var<T> maximum<T>(const Var<T>&, std::type_identity_t<T>);

DEFFX_INSTANTIATE_FLOAT_DOUBLE(DEFFX_INSTANTIATE)

}  // namespace deffx
