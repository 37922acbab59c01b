#include "meshshift/models/parameters.hpp"

#include <cmath>

#include "meshshift/tensor/grad_check.hpp"
#include "meshshift/tensor/ops.hpp"

namespace meshshift::models {

std::size_t ParameterSet::add(std::string name, Tensor value) {
  for (const auto& n : names_) {
    if (n == name) throw ConfigError("duplicate parameter name '" + name + "'");
  }
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::size_t ParameterSet::numel() const noexcept {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.numel();
  return n;
}

std::size_t ParameterSet::index(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  throw ConfigError("no parameter named '" + name + "'");
}

std::vector<double> ParameterSet::flatten() const {
  std::vector<double> flat;
  flat.reserve(numel());
  for (const auto& v : values_) flat.insert(flat.end(), v.data().begin(), v.data().end());
  return flat;
}

void ParameterSet::assign_flat(std::span<const double> flat) {
  if (flat.size() != numel()) {
    throw ShapeError("flat parameter vector has " + std::to_string(flat.size()) + " values, expected " +
                     std::to_string(numel()));
  }
  std::size_t off = 0;
  for (auto& v : values_) {
    auto dst = v.mutable_data();
    std::copy(flat.begin() + static_cast<long>(off), flat.begin() + static_cast<long>(off + dst.size()), dst.begin());
    off += dst.size();
    v.check_finite("parameter assignment");
  }
}

std::vector<Var> ParameterSet::bind(Tape& tape) const {
  std::vector<Var> vars;
  vars.reserve(values_.size());
  for (const auto& v : values_) vars.push_back(tape.leaf(v));
  return vars;
}

bool ParameterSet::all_finite() const {
  for (const auto& v : values_) {
    for (double x : v.data()) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

Tensor uniform_fan_in(std::mt19937_64& rng, std::size_t rows, std::size_t cols, std::size_t fan_in) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<double> d(rows * cols);
  for (auto& x : d) x = u(rng);
  return Tensor::matrix(rows, cols, std::move(d));
}

Linear make_linear(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng) {
  Linear l;
  l.in = in;
  l.out = out;
  l.weight = ps.add(name + ".weight", uniform_fan_in(rng, in, out, in));
  l.bias = ps.add(name + ".bias", uniform_fan_in(rng, 1, out, in));
  return l;
}

Var apply(Tape& tape, std::span<const Var> p, const Linear& l, Var x) {
  return tensor::add_row(tape, tensor::matmul(tape, x, p[l.weight]), p[l.bias]);
}

Mlp make_mlp(ParameterSet& ps, const std::string& name, const std::vector<std::size_t>& widths, std::mt19937_64& rng) {
  if (widths.size() < 2) throw ConfigError("an MLP needs input and output widths");
  Mlp m;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    m.layers.push_back(make_linear(ps, name + "." + std::to_string(i), widths[i], widths[i + 1], rng));
  }
  return m;
}

Var apply(Tape& tape, std::span<const Var> p, const Mlp& mlp, Var x) {
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    x = apply(tape, p, mlp.layers[i], x);
    if (i + 1 < mlp.layers.size()) x = tensor::gelu(tape, x);
  }
  return x;
}

double grad_check_parameters(const ParamFunction& f, const ParameterSet& ps, double step, std::size_t begin,
                             std::size_t end) {
  end = std::min(end, ps.size());
  double worst = 0.0;
  for (std::size_t k = begin; k < end; ++k) {
    tensor::TapeFunction<double> fk = [&](Tape& tape, Var x) {
      std::vector<Var> vars;
      vars.reserve(ps.size());
      for (std::size_t i = 0; i < ps.size(); ++i) vars.push_back(i == k ? x : tape.constant(ps[i]));
      return f(tape, vars);
    };
    worst = std::max(worst, tensor::grad_check<double>(fk, ps[k], step));
  }
  return worst;
}

}  // namespace meshshift::models
