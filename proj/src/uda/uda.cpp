#include "meshshift/uda/uda.hpp"

#include <cmath>

#include "meshshift/tensor/ops.hpp"

namespace meshshift::uda {

namespace ops = meshshift::tensor;

std::string to_string(Kind k) {
  switch (k) {
    case Kind::none: return "none";
    case Kind::coral: return "coral";
    case Kind::cmd: return "cmd";
    case Kind::dann: return "dann";
  }
  return "?";
}

Kind kind_from_string(const std::string& s) {
  if (s == "none") return Kind::none;
  if (s == "coral") return Kind::coral;
  if (s == "cmd") return Kind::cmd;
  if (s == "dann") return Kind::dann;
  throw ConfigError("unknown UDA kind '" + s + "' (expected none, coral, cmd or dann)");
}

void UdaConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("UDA lambda must be finite and nonnegative");
  if (kind == Kind::none && lambda != 0.0) throw ConfigError("UDA kind none requires lambda = 0");
  if (cmd_order < 1) throw ConfigError("CMD order must be at least 1");
  if (!(cmd_lo < cmd_hi)) throw ConfigError("CMD bounds need a < b");
  if (dann_hidden.empty()) throw ConfigError("DANN discriminator needs a hidden layer");
}

void to_json(nlohmann::json& j, const UdaConfig& c) {
  j = {{"kind", to_string(c.kind)},
       {"lambda", c.lambda},
       {"cmd_order", c.cmd_order},
       {"cmd_bounds", {c.cmd_lo, c.cmd_hi}},
       {"dann_hidden", c.dann_hidden}};
}

void from_json(const nlohmann::json& j, UdaConfig& c) {
  c.kind = kind_from_string(j.at("kind").get<std::string>());
  c.lambda = j.at("lambda").get<double>();
  c.cmd_order = j.value("cmd_order", std::size_t{5});
  if (j.contains("cmd_bounds")) {
    c.cmd_lo = j.at("cmd_bounds").at(0).get<double>();
    c.cmd_hi = j.at("cmd_bounds").at(1).get<double>();
  }
  c.dann_hidden = j.value("dann_hidden", std::vector<std::size_t>{16});
}

namespace {

Var centered(Tape& tape, Var h, Var mean_row) { return ops::add_row(tape, h, ops::scale(tape, mean_row, -1.0)); }

Var l2_norm(Tape& tape, Var x) { return ops::sqrt(tape, ops::sum(tape, ops::mul(tape, x, x))); }

void require_same_width(const Tape& tape, Var hs, Var ht, const char* who) {
  if (tape.value(hs).cols() != tape.value(ht).cols()) {
    throw ShapeError(std::string(who) + ": source and target representations differ in width");
  }
}

}  // namespace

Var coral_distance(Tape& tape, Var hs, Var ht) {
  require_same_width(tape, hs, ht, "coral_distance");
  const std::size_t bs = tape.value(hs).rows(), bt = tape.value(ht).rows(), m = tape.value(hs).cols();
  if (bs < 2 || bt < 2) throw InsufficientBatchError("coral_distance needs at least 2 rows per batch");
  auto cov = [&](Var h, std::size_t b) {
    Var c = centered(tape, h, ops::reduce_mean(tape, h, 0));
    return ops::scale(tape, ops::matmul(tape, ops::transpose(tape, c), c), 1.0 / static_cast<double>(b - 1));
  };
  Var d = ops::sub(tape, cov(hs, bs), cov(ht, bt));
  const double md = static_cast<double>(m);
  return ops::scale(tape, ops::sum(tape, ops::mul(tape, d, d)), 1.0 / (4.0 * md * md));
}

Var cmd_distance(Tape& tape, Var hs, Var ht, std::size_t order, double a, double b) {
  require_same_width(tape, hs, ht, "cmd_distance");
  if (order < 1) throw ConfigError("CMD order must be at least 1");
  if (!(a < b)) throw ConfigError("CMD bounds need a < b");
  const double span = std::abs(b - a);
  Var ms = ops::reduce_mean(tape, hs, 0), mt = ops::reduce_mean(tape, ht, 0);
  Var total = ops::scale(tape, l2_norm(tape, ops::sub(tape, ms, mt)), 1.0 / span);
  Var cs = centered(tape, hs, ms), ct = centered(tape, ht, mt);
  Var ps = cs, pt = ct;
  for (std::size_t k = 2; k <= order; ++k) {
    ps = ops::mul(tape, ps, cs);
    pt = ops::mul(tape, pt, ct);
    Var diff = ops::sub(tape, ops::reduce_mean(tape, ps, 0), ops::reduce_mean(tape, pt, 0));
    total = ops::add(tape, total, ops::scale(tape, l2_norm(tape, diff), 1.0 / std::pow(span, static_cast<double>(k))));
  }
  return total;
}

Var grad_reverse(Tape& tape, Var h, double strength) {
  const auto& v = tape.value(h);
  return tape.record(v, {h}, [h, strength](std::span<const double> g, Tape& t) {
    auto gh = t.grad_buffer(h);
    for (std::size_t i = 0; i < g.size(); ++i) gh[i] += -strength * g[i];
  });
}

Var softplus(Tape& tape, Var x) {
  // max(x, 0) + log(1 + exp(-|x|))
  Var pos = ops::relu(tape, x);
  Var abs = ops::add(tape, pos, ops::relu(tape, ops::scale(tape, x, -1.0)));
  return ops::add(tape, pos, ops::log(tape, ops::add_scalar(tape, ops::exp(tape, ops::scale(tape, abs, -1.0)), 1.0)));
}

Discriminator make_discriminator(ParameterSet& ps, std::size_t latent, const std::vector<std::size_t>& hidden,
                                 std::mt19937_64& rng) {
  Discriminator d;
  d.begin = ps.size();
  std::vector<std::size_t> widths = {latent};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);
  d.mlp = models::make_mlp(ps, "discriminator", widths, rng);
  d.end = ps.size();
  return d;
}

Var dann_domain_loss(Tape& tape, std::span<const Var> p, const Discriminator& disc, Var hs, Var ht,
                     double strength) {
  require_same_width(tape, hs, ht, "dann_domain_loss");
  const double n = static_cast<double>(tape.value(hs).rows() + tape.value(ht).rows());
  Var ls = models::apply(tape, p, disc.mlp, grad_reverse(tape, hs, strength));
  Var lt = models::apply(tape, p, disc.mlp, grad_reverse(tape, ht, strength));
  Var bce_s = ops::sum(tape, softplus(tape, ls));
  Var bce_t = ops::sum(tape, softplus(tape, ops::scale(tape, lt, -1.0)));
  return ops::scale(tape, ops::add(tape, bce_s, bce_t), 1.0 / n);
}

Var combined_objective(Tape& tape, Var recon, Var distance, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
  return ops::add(tape, recon, ops::scale(tape, distance, lambda));
}

Var domain_distance(Tape& tape, const UdaConfig& cfg, std::span<const Var> disc_params, const Discriminator* disc,
                    Var zs, Var zt) {
  switch (cfg.kind) {
    case Kind::coral: return coral_distance(tape, zs, zt);
    case Kind::cmd:
      return cmd_distance(tape, ops::tanh(tape, zs), ops::tanh(tape, zt), cfg.cmd_order, cfg.cmd_lo, cfg.cmd_hi);
    case Kind::dann:
      if (!disc) throw ConfigError("DANN needs a discriminator");
      return dann_domain_loss(tape, disc_params, *disc, zs, zt, 1.0);
    case Kind::none: break;
  }
  throw ConfigError("no domain distance for UDA kind none");
}

}  // namespace meshshift::uda
