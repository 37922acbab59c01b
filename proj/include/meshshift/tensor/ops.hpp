#pragma once

// Primitive differentiable operations. Every op validates shapes, produces a
// finite result (or throws NumericError) and registers its backward rule on
// the tape. Everything else in the library is composed from these.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "meshshift/tensor/tape.hpp"

namespace meshshift::tensor {

using Index = std::vector<std::uint32_t>;
using IndexPtr = std::shared_ptr<const Index>;

inline IndexPtr make_index(Index ids) { return std::make_shared<const Index>(std::move(ids)); }

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <class T>
using MutMap = Eigen::Map<RowMat<T>>;

template <class T>
ConstMap<T> view(const BasicTensor<T>& t) {
  return ConstMap<T>(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}
template <class T>
ConstMap<T> view(std::span<const T> buf, std::size_t rows, std::size_t cols) {
  return ConstMap<T>(buf.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
template <class T>
MutMap<T> view(std::span<T> buf, std::size_t rows, std::size_t cols) {
  return MutMap<T>(buf.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

inline void require(bool cond, const char* msg) {
  if (!cond) [[unlikely]] throw ShapeError(msg);
}
/// Message is only built on failure.
template <class MakeMsg>
  requires std::invocable<MakeMsg>
void require(bool cond, MakeMsg&& make_msg) {
  if (!cond) [[unlikely]] throw ShapeError(make_msg());
}

template <class T>
BasicTensor<T> matrix_from(std::size_t rows, std::size_t cols, std::vector<T> data) {
  return BasicTensor<T>(Shape{rows, cols}, std::move(data));
}

/// Id the next recorded node will receive.
template <class T>
Var next_var(const BasicTape<T>& tape) {
  return Var{static_cast<std::uint32_t>(tape.size())};
}

/// Elementwise map; df(x, y) is the derivative at input x with output y.
template <class T, class F, class DF>
Var unary(BasicTape<T>& tape, Var a, F f, DF df) {
  const auto& av = tape.value(a);
  auto in = av.data();
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  const Var self = next_var(tape);
  return tape.record(BasicTensor<T>(av.shape(), std::move(out)), {a},
                     [a, self, df](std::span<const T> g, BasicTape<T>& t) {
                       auto x = t.value(a).data();
                       auto y = t.value(self).data();
                       auto ga = t.grad_buffer(a);
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(x[i], y[i]);
                     });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

template <class T>
Var matmul(BasicTape<T>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  detail::require(av.cols() == bv.rows(), [&] { return std::string("matmul: inner dimensions disagree, " +
                                              shape_string(av.shape()) + " x " + shape_string(bv.shape())); });
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  std::vector<T> out(m * n);
  detail::view<T>(std::span<T>(out), m, n).noalias() = detail::view(av) * detail::view(bv);
  return tape.record(detail::matrix_from<T>(m, n, std::move(out)), {a, b},
                     [a, b, m, k, n](std::span<const T> g, BasicTape<T>& t) {
                       auto G = detail::view<T>(g, m, n);
                       if (t.needs_grad(a)) {
                         detail::view<T>(t.grad_buffer(a), m, k).noalias() +=
                             G * detail::view(t.value(b)).transpose();
                       }
                       if (t.needs_grad(b)) {
                         detail::view<T>(t.grad_buffer(b), k, n).noalias() +=
                             detail::view(t.value(a)).transpose() * G;
                       }
                     });
}

template <class T>
Var transpose(BasicTape<T>& tape, Var a) {
  const auto& av = tape.value(a);
  const std::size_t r = av.rows(), c = av.cols();
  std::vector<T> out(r * c);
  detail::view<T>(std::span<T>(out), c, r) = detail::view(av).transpose();
  return tape.record(detail::matrix_from<T>(c, r, std::move(out)), {a},
                     [a, r, c](std::span<const T> g, BasicTape<T>& t) {
                       detail::view<T>(t.grad_buffer(a), r, c) += detail::view<T>(g, c, r).transpose();
                     });
}

// ---------------------------------------------------------------------------
// Elementwise binary ops (identical shapes)

template <class T>
Var add(BasicTape<T>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  detail::require(av.shape() == bv.shape(), [&] { return std::string("add: shape mismatch " + shape_string(av.shape()) + " vs " +
                                                shape_string(bv.shape())); });
  std::vector<T> out(av.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av.data()[i] + bv.data()[i];
  return tape.record(BasicTensor<T>(av.shape(), std::move(out)), {a, b},
                     [a, b](std::span<const T> g, BasicTape<T>& t) {
                       for (Var p : {a, b}) {
                         if (!t.needs_grad(p)) continue;
                         auto gp = t.grad_buffer(p);
                         for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
                       }
                     });
}

template <class T>
Var sub(BasicTape<T>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  detail::require(av.shape() == bv.shape(), [&] { return std::string("sub: shape mismatch " + shape_string(av.shape()) + " vs " +
                                                shape_string(bv.shape())); });
  std::vector<T> out(av.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av.data()[i] - bv.data()[i];
  return tape.record(BasicTensor<T>(av.shape(), std::move(out)), {a, b},
                     [a, b](std::span<const T> g, BasicTape<T>& t) {
                       if (t.needs_grad(a)) {
                         auto ga = t.grad_buffer(a);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                       }
                       if (t.needs_grad(b)) {
                         auto gb = t.grad_buffer(b);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                       }
                     });
}

template <class T>
Var mul(BasicTape<T>& tape, Var a, Var b) {
  const auto& av = tape.value(a);
  const auto& bv = tape.value(b);
  detail::require(av.shape() == bv.shape(), [&] { return std::string("mul: shape mismatch " + shape_string(av.shape()) + " vs " +
                                                shape_string(bv.shape())); });
  std::vector<T> out(av.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av.data()[i] * bv.data()[i];
  return tape.record(BasicTensor<T>(av.shape(), std::move(out)), {a, b},
                     [a, b](std::span<const T> g, BasicTape<T>& t) {
                       auto x = t.value(a).data();
                       auto y = t.value(b).data();
                       if (t.needs_grad(a)) {
                         auto ga = t.grad_buffer(a);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
                       }
                       if (t.needs_grad(b)) {
                         auto gb = t.grad_buffer(b);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
                       }
                     });
}

/// a (r x c) + row (1 x c) broadcast over rows. Used for biases.
template <class T>
Var add_row(BasicTape<T>& tape, Var a, Var row) {
  const auto& av = tape.value(a);
  const auto& rv = tape.value(row);
  detail::require(rv.numel() == av.cols(), [&] { return std::string("add_row: row of " + std::to_string(rv.numel()) +
                                               " values cannot broadcast over " + shape_string(av.shape())); });
  const std::size_t r = av.rows(), c = av.cols();
  std::vector<T> out(av.numel());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = av.data()[i * c + j] + rv.data()[j];
  return tape.record(BasicTensor<T>(av.shape(), std::move(out)), {a, row},
                     [a, row, r, c](std::span<const T> g, BasicTape<T>& t) {
                       if (t.needs_grad(a)) {
                         auto ga = t.grad_buffer(a);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                       }
                       if (t.needs_grad(row)) {
                         auto gr = t.grad_buffer(row);
                         for (std::size_t i = 0; i < r; ++i)
                           for (std::size_t j = 0; j < c; ++j) gr[j] += g[i * c + j];
                       }
                     });
}

template <class T>
Var scale(BasicTape<T>& tape, Var a, T s) {
  return detail::unary(tape, a, [s](T x) { return s * x; }, [s](T, T) { return s; });
}

template <class T>
Var add_scalar(BasicTape<T>& tape, Var a, T s) {
  return detail::unary(tape, a, [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities

template <class T>
Var relu(BasicTape<T>& tape, Var a) {
  return detail::unary(tape, a, [](T x) { return x > T(0) ? x : T(0); },
                       [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <class T>
Var tanh(BasicTape<T>& tape, Var a) {
  return detail::unary(tape, a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <class T>
Var sigmoid(BasicTape<T>& tape, Var a) {
  return detail::unary(
      tape, a,
      [](T x) { return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x)); },
      [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Var exp(BasicTape<T>& tape, Var a) {
  return detail::unary(tape, a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <class T>
Var log(BasicTape<T>& tape, Var a) {
  return detail::unary(tape, a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

/// Square root; the derivative at exactly zero is taken as zero.
template <class T>
Var sqrt(BasicTape<T>& tape, Var a) {
  return detail::unary(tape, a, [](T x) { return std::sqrt(x); },
                       [](T, T y) { return y > T(0) ? T(0.5) / y : T(0); });
}

/// GELU, tanh approximation. tanh is evaluated through a vectorised exp and
/// cached for the backward pass.
template <class T>
Var gelu(BasicTape<T>& tape, Var a) {
  constexpr T c = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T k = T(0.044715);
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  const auto& av = tape.value(a);
  const auto n = static_cast<Eigen::Index>(av.numel());
  Eigen::Map<const Arr> x(av.data().data(), n);
  // tanh(u) = 1 - 2 / (1 + exp(2u)); saturates cleanly at both ends.
  Arr th = T(1) - T(2) / (T(1) + (T(2) * c * (x + k * x.cube())).exp());
  std::vector<T> out(av.numel());
  Eigen::Map<Arr>(out.data(), n) = T(0.5) * x * (T(1) + th);
  std::vector<T> cached(th.data(), th.data() + n);
  return tape.record(BasicTensor<T>(av.shape(), std::move(out)), {a},
                     [a, th = std::move(cached)](std::span<const T> g, BasicTape<T>& t) {
                       auto xs = t.value(a).data();
                       auto ga = t.grad_buffer(a);
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const T xi = xs[i], ti = th[i];
                         const T d = T(0.5) * (T(1) + ti) +
                                     T(0.5) * xi * (T(1) - ti * ti) * c * (T(1) + T(3) * k * xi * xi);
                         ga[i] += g[i] * d;
                       }
                     });
}

// ---------------------------------------------------------------------------
// Structural ops

/// Column-wise concatenation of matrices with equal row counts.
template <class T>
Var concat_cols(BasicTape<T>& tape, std::span<const Var> parts) {
  detail::require(!parts.empty(), "concat_cols: no inputs");
  const std::size_t r = tape.value(parts[0]).rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (Var p : parts) {
    const auto& v = tape.value(p);
    detail::require(v.rows() == r, "concat_cols: row count mismatch");
    widths.push_back(v.cols());
    total += v.cols();
  }
  std::vector<T> out(r * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto src = tape.value(parts[k]).data();
    const std::size_t w = widths[k];
    for (std::size_t i = 0; i < r; ++i) std::copy_n(src.data() + i * w, w, out.data() + i * total + off);
    off += w;
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return tape.record(detail::matrix_from<T>(r, total, std::move(out)), std::span<const Var>(ps),
                     [ps, widths, r, total](std::span<const T> g, BasicTape<T>& t) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < ps.size(); ++k) {
                         const std::size_t w = widths[k];
                         if (t.needs_grad(ps[k])) {
                           auto gp = t.grad_buffer(ps[k]);
                           for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < w; ++j) gp[i * w + j] += g[i * total + off + j];
                         }
                         off += w;
                       }
                     });
}

template <class T>
Var concat_cols(BasicTape<T>& tape, std::initializer_list<Var> parts) {
  return concat_cols(tape, std::span<const Var>(parts.begin(), parts.size()));
}

/// Row broadcast: out[i] = a[ids[i]]. Backward scatter-adds into the source rows.
template <class T>
Var gather_rows(BasicTape<T>& tape, Var a, IndexPtr ids) {
  const auto& av = tape.value(a);
  const std::size_t c = av.cols(), n = ids->size();
  detail::require(n > 0, "gather_rows: empty index");
  std::vector<T> out(n * c);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = (*ids)[i];
    detail::require(src < av.rows(), "gather_rows: index out of range");
    std::copy_n(av.data().data() + src * c, c, out.data() + i * c);
  }
  return tape.record(detail::matrix_from<T>(n, c, std::move(out)), {a},
                     [a, ids, c](std::span<const T> g, BasicTape<T>& t) {
                       auto ga = t.grad_buffer(a);
                       for (std::size_t i = 0; i < ids->size(); ++i) {
                         const std::size_t dst = (*ids)[i];
                         for (std::size_t j = 0; j < c; ++j) ga[dst * c + j] += g[i * c + j];
                       }
                     });
}

namespace detail {
inline std::vector<std::size_t> segment_counts(const Index& ids, std::size_t rows, std::size_t segments,
                                               const char* op) {
  require(ids.size() == rows, [&] { return std::string(op) + ": segment id count does not match row count"; });
  std::vector<std::size_t> counts(segments, 0);
  for (auto s : ids) {
    if (s >= segments) [[unlikely]] throw ShapeError(std::string(op) + ": segment id out of range");
    ++counts[s];
  }
  for (std::size_t s = 0; s < segments; ++s) {
    if (counts[s] == 0) {
      throw DegenerateSegmentError(std::string(op) + ": segment " + std::to_string(s) + " is empty");
    }
  }
  return counts;
}
}  // namespace detail

/// Row s of the result is the mean of the rows of `values` whose id is s.
template <class T>
Var segment_mean(BasicTape<T>& tape, Var values, IndexPtr ids, std::size_t num_segments) {
  const auto& v = tape.value(values);
  const std::size_t d = v.cols();
  auto counts = detail::segment_counts(*ids, v.rows(), num_segments, "segment_mean");
  std::vector<T> out(num_segments * d, T(0));
  auto src = v.data();
  for (std::size_t i = 0; i < ids->size(); ++i) {
    T* row = out.data() + (*ids)[i] * d;
    for (std::size_t j = 0; j < d; ++j) row[j] += src[i * d + j];
  }
  std::vector<T> inv(num_segments);
  for (std::size_t s = 0; s < num_segments; ++s) {
    inv[s] = T(1) / static_cast<T>(counts[s]);
    for (std::size_t j = 0; j < d; ++j) out[s * d + j] *= inv[s];
  }
  return tape.record(detail::matrix_from<T>(num_segments, d, std::move(out)), {values},
                     [values, ids, d, inv = std::move(inv)](std::span<const T> g, BasicTape<T>& t) {
                       auto gv = t.grad_buffer(values);
                       for (std::size_t i = 0; i < ids->size(); ++i) {
                         const std::size_t s = (*ids)[i];
                         for (std::size_t j = 0; j < d; ++j) gv[i * d + j] += g[s * d + j] * inv[s];
                       }
                     });
}

/// Column-wise maximum within each segment. Ties route the gradient to the first row.
template <class T>
Var segment_max(BasicTape<T>& tape, Var values, IndexPtr ids, std::size_t num_segments) {
  const auto& v = tape.value(values);
  const std::size_t d = v.cols();
  detail::segment_counts(*ids, v.rows(), num_segments, "segment_max");
  std::vector<T> out(num_segments * d, -std::numeric_limits<T>::infinity());
  std::vector<std::uint32_t> arg(num_segments * d, 0);
  auto src = v.data();
  for (std::size_t i = 0; i < ids->size(); ++i) {
    const std::size_t s = (*ids)[i];
    for (std::size_t j = 0; j < d; ++j) {
      if (src[i * d + j] > out[s * d + j]) {
        out[s * d + j] = src[i * d + j];
        arg[s * d + j] = static_cast<std::uint32_t>(i);
      }
    }
  }
  return tape.record(detail::matrix_from<T>(num_segments, d, std::move(out)), {values},
                     [values, d, arg = std::move(arg)](std::span<const T> g, BasicTape<T>& t) {
                       auto gv = t.grad_buffer(values);
                       for (std::size_t k = 0; k < arg.size(); ++k) gv[arg[k] * d + (k % d)] += g[k];
                     });
}

/// segment_mean(gather_rows(values, gather_ids), segment_ids, num_segments)
/// without materialising the gathered rows. Used for neighbourhood averaging.
template <class T>
Var gather_segment_mean(BasicTape<T>& tape, Var values, IndexPtr gather_ids, IndexPtr segment_ids,
                        std::size_t num_segments) {
  const auto& v = tape.value(values);
  const std::size_t d = v.cols();
  detail::require(gather_ids->size() == segment_ids->size(),
                  "gather_segment_mean: gather and segment index lengths differ");
  auto counts = detail::segment_counts(*segment_ids, segment_ids->size(), num_segments, "gather_segment_mean");
  std::vector<T> out(num_segments * d, T(0));
  auto src = v.data();
  for (std::size_t e = 0; e < gather_ids->size(); ++e) {
    const std::size_t from = (*gather_ids)[e];
    detail::require(from < v.rows(), "gather_segment_mean: gather index out of range");
    T* row = out.data() + (*segment_ids)[e] * d;
    const T* in = src.data() + from * d;
    for (std::size_t j = 0; j < d; ++j) row[j] += in[j];
  }
  std::vector<T> inv(num_segments);
  for (std::size_t s = 0; s < num_segments; ++s) {
    inv[s] = T(1) / static_cast<T>(counts[s]);
    for (std::size_t j = 0; j < d; ++j) out[s * d + j] *= inv[s];
  }
  return tape.record(detail::matrix_from<T>(num_segments, d, std::move(out)), {values},
                     [values, gather_ids, segment_ids, d, inv = std::move(inv)](std::span<const T> g,
                                                                                  BasicTape<T>& t) {
                       auto gv = t.grad_buffer(values);
                       for (std::size_t e = 0; e < gather_ids->size(); ++e) {
                         const std::size_t s = (*segment_ids)[e];
                         T* dst = gv.data() + (*gather_ids)[e] * d;
                         const T* up = g.data() + s * d;
                         const T w = inv[s];
                         for (std::size_t j = 0; j < d; ++j) dst[j] += up[j] * w;
                       }
                     });
}

// ---------------------------------------------------------------------------
// Reductions

template <class T>
Var sum(BasicTape<T>& tape, Var a) {
  const auto& av = tape.value(a);
  T acc = T(0);
  for (T x : av.data()) acc += x;
  return tape.record(BasicTensor<T>::scalar(acc), {a}, [a](std::span<const T> g, BasicTape<T>& t) {
    auto ga = t.grad_buffer(a);
    for (auto& x : ga) x += g[0];
  });
}

template <class T>
Var mean(BasicTape<T>& tape, Var a) {
  const auto n = static_cast<T>(tape.value(a).numel());
  return scale(tape, sum(tape, a), T(1) / n);
}

/// Mean over rows (axis 0, result 1 x c) or over columns (axis 1, result r x 1).
template <class T>
Var reduce_mean(BasicTape<T>& tape, Var a, int axis) {
  const auto& av = tape.value(a);
  const std::size_t r = av.rows(), c = av.cols();
  detail::require(axis == 0 || axis == 1, "reduce_mean: axis must be 0 or 1");
  const bool rows_axis = axis == 0;
  std::vector<T> out(rows_axis ? c : r, T(0));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[rows_axis ? j : i] += av.data()[i * c + j];
  const T inv = T(1) / static_cast<T>(rows_axis ? r : c);
  for (auto& x : out) x *= inv;
  auto shape = rows_axis ? Shape{1, c} : Shape{r, 1};
  return tape.record(BasicTensor<T>(shape, std::move(out)), {a},
                     [a, r, c, rows_axis, inv](std::span<const T> g, BasicTape<T>& t) {
                       auto ga = t.grad_buffer(a);
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[rows_axis ? j : i] * inv;
                     });
}

/// Maximum over rows (axis 0) or columns (axis 1).
template <class T>
Var reduce_max(BasicTape<T>& tape, Var a, int axis) {
  const auto& av = tape.value(a);
  const std::size_t r = av.rows(), c = av.cols();
  detail::require(axis == 0 || axis == 1, "reduce_max: axis must be 0 or 1");
  const bool rows_axis = axis == 0;
  const std::size_t n = rows_axis ? c : r;
  std::vector<T> out(n, -std::numeric_limits<T>::infinity());
  std::vector<std::size_t> arg(n, 0);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const std::size_t k = rows_axis ? j : i;
      const T x = av.data()[i * c + j];
      if (x > out[k]) {
        out[k] = x;
        arg[k] = i * c + j;
      }
    }
  }
  auto shape = rows_axis ? Shape{1, c} : Shape{r, 1};
  return tape.record(BasicTensor<T>(shape, std::move(out)), {a},
                     [a, arg = std::move(arg)](std::span<const T> g, BasicTape<T>& t) {
                       auto ga = t.grad_buffer(a);
                       for (std::size_t k = 0; k < arg.size(); ++k) ga[arg[k]] += g[k];
                     });
}

/// Rescales `a` so its Euclidean norm does not exceed max_norm.
template <class T>
Var clip_by_norm(BasicTape<T>& tape, Var a, T max_norm) {
  detail::require(max_norm > T(0), "clip_by_norm: max_norm must be positive");
  const auto& av = tape.value(a);
  T sq = T(0);
  for (T x : av.data()) sq += x * x;
  const T norm = std::sqrt(sq);
  if (norm <= max_norm) return scale(tape, a, T(1));
  const T f = max_norm / norm;
  std::vector<T> out(av.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av.data()[i] * f;
  return tape.record(BasicTensor<T>(av.shape(), std::move(out)), {a},
                     [a, f, norm](std::span<const T> g, BasicTape<T>& t) {
                       auto x = t.value(a).data();
                       T dot = T(0);
                       for (std::size_t i = 0; i < g.size(); ++i) dot += x[i] * g[i];
                       auto ga = t.grad_buffer(a);
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += f * (g[i] - x[i] * dot / (norm * norm));
                     });
}

/// Scales a set of gradient tensors in place so their joint norm is at most max_norm.
/// Returns the norm before clipping.
template <class T>
T clip_global_norm(std::span<BasicTensor<T>> grads, T max_norm) {
  T sq = T(0);
  for (const auto& g : grads)
    for (T x : g.data()) sq += x * x;
  const T norm = std::sqrt(sq);
  if (norm > max_norm) {
    const T f = max_norm / norm;
    for (auto& g : grads)
      for (auto& x : g.mutable_data()) x *= f;
  }
  return norm;
}

}  // namespace meshshift::tensor
