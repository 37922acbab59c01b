#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "meshshift/tensor/ops.hpp"

namespace meshshift::tensor {

/// Scalar function of one tensor argument, expressed on a tape.
template <class T>
using TapeFunction = std::function<Var(BasicTape<T>&, Var)>;

/// Largest |analytic_i - central_i| / max(1, |central_i|) over all coordinates of x.
template <class T>
T grad_check(const TapeFunction<T>& f, const BasicTensor<T>& x, T step) {
  if (!(step > T(0))) throw Error("grad_check: step must be positive");

  BasicTape<T> tape;
  Var xv = tape.leaf(x);
  Var y = f(tape, xv);
  const auto analytic = tape.backward(y).of(xv);

  auto eval = [&](const BasicTensor<T>& at) {
    BasicTape<T> t(false);
    Var v = t.leaf(at);
    const T r = t.value(f(t, v)).item();
    if (!std::isfinite(r)) throw NumericError("grad_check: non-finite function value");
    return r;
  };

  T worst = T(0);
  BasicTensor<T> probe = x;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const T orig = x.data()[i];
    probe.mutable_data()[i] = orig + step;
    const T fp = eval(probe);
    probe.mutable_data()[i] = orig - step;
    const T fm = eval(probe);
    probe.mutable_data()[i] = orig;
    const T central = (fp - fm) / (T(2) * step);
    const T err = std::abs(analytic.data()[i] - central) / std::max(T(1), std::abs(central));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace meshshift::tensor
