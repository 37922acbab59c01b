#pragma once

#include <cstddef>
#include <vector>

#include "meshshift/tensor/tensor.hpp"

namespace meshshift::harness {

using tensor::Tensor;

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
  bool operator==(const AdamWConfig&) const = default;
};

/// Adam with decoupled weight decay over a fixed list of tensors.
class AdamW {
 public:
  AdamW(const std::vector<Tensor>& params, AdamWConfig cfg = {});

  /// One update at learning rate `lr`. Weight decay is applied as p -= lr * wd * p.
  void step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, double lr);
  std::size_t steps() const noexcept { return t_; }

 private:
  AdamWConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

/// lr0 * (1 + cos(pi * step / total)) / 2, held at 0 past the end.
double cosine_lr(double lr0, std::size_t step, std::size_t total);

/// Exponential moving average of parameter tensors.
class Ema {
 public:
  Ema(const std::vector<Tensor>& params, double decay);
  void update(const std::vector<Tensor>& params);
  const std::vector<Tensor>& shadow() const noexcept { return shadow_; }

 private:
  double decay_;
  std::vector<Tensor> shadow_;
};

}  // namespace meshshift::harness
