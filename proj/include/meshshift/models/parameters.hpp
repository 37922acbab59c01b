#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "meshshift/tensor/tape.hpp"

namespace meshshift::models {

using tensor::Tape;
using tensor::Tensor;
using tensor::Var;

/// Ordered named tensors. The order defines the flat layout and the order of tape leaves.
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor value);

  std::size_t size() const noexcept { return values_.size(); }
  std::size_t numel() const noexcept;
  const Tensor& operator[](std::size_t i) const { return values_.at(i); }
  Tensor& mutable_at(std::size_t i) { return values_.at(i); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  std::size_t index(const std::string& name) const;
  std::vector<Tensor>& tensors() noexcept { return values_; }
  const std::vector<Tensor>& tensors() const noexcept { return values_; }

  std::vector<double> flatten() const;
  /// Overwrites all values from a flat vector laid out like flatten().
  void assign_flat(std::span<const double> flat);
  /// Registers every tensor as a leaf of `tape`, in order.
  std::vector<Var> bind(Tape& tape) const;
  bool all_finite() const;

  bool operator==(const ParameterSet&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

/// Uniform in +-sqrt(1 / fan_in).
Tensor uniform_fan_in(std::mt19937_64& rng, std::size_t rows, std::size_t cols, std::size_t fan_in);

struct Linear {
  std::size_t weight = 0;  // in x out
  std::size_t bias = 0;    // 1 x out
  std::size_t in = 0, out = 0;
};

Linear make_linear(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng);
Var apply(Tape& tape, std::span<const Var> p, const Linear& l, Var x);

/// Linear layers with GELU between them and no activation after the last.
struct Mlp {
  std::vector<Linear> layers;
};

Mlp make_mlp(ParameterSet& ps, const std::string& name, const std::vector<std::size_t>& widths, std::mt19937_64& rng);
Var apply(Tape& tape, std::span<const Var> p, const Mlp& mlp, Var x);

using ParamFunction = std::function<Var(Tape&, std::span<const Var>)>;

/// Worst grad_check error of a scalar function of all tensors in `ps`, checking
/// tensors [begin, end) one at a time while the rest enter as constants.
double grad_check_parameters(const ParamFunction& f, const ParameterSet& ps, double step, std::size_t begin = 0,
                             std::size_t end = static_cast<std::size_t>(-1));

}  // namespace meshshift::models
