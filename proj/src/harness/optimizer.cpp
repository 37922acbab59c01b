#include "meshshift/harness/optimizer.hpp"

#include <cmath>
#include <numbers>

namespace meshshift::harness {

AdamW::AdamW(const std::vector<Tensor>& params, AdamWConfig cfg) : cfg_(cfg) {
  for (const auto& p : params) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void AdamW::step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, double lr) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError("optimizer was built for a different parameter list");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].mutable_data();
    auto g = grads[i].data();
    if (g.size() != p.size()) throw ShapeError("gradient and parameter sizes differ");
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
      const double update = (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg_.eps);
      p[k] -= lr * (update + cfg_.weight_decay * p[k]);
    }
    params[i].check_finite("optimizer step");
  }
}

double cosine_lr(double lr0, std::size_t step, std::size_t total) {
  if (total == 0 || step >= total) return 0.0;
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total)));
}

Ema::Ema(const std::vector<Tensor>& params, double decay) : decay_(decay), shadow_(params) {}

void Ema::update(const std::vector<Tensor>& params) {
  for (std::size_t i = 0; i < shadow_.size(); ++i) {
    auto s = shadow_[i].mutable_data();
    auto p = params[i].data();
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = decay_ * s[k] + (1.0 - decay_) * p[k];
  }
}

}  // namespace meshshift::harness
