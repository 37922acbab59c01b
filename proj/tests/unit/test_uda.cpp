#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "meshshift/datagen/solvers.hpp"
#include "meshshift/models/surrogate.hpp"
#include "meshshift/tensor/grad_check.hpp"
#include "meshshift/uda/uda.hpp"

using namespace meshshift;
using namespace meshshift::uda;
using tensor::Tensor;
using tensor::TapeFunction;
namespace ops = meshshift::tensor;

namespace {

Tensor random_batch(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double shift = 0.0) {
  std::normal_distribution<double> n(shift, 0.6);
  std::vector<double> d(rows * cols);
  for (auto& x : d) x = n(rng);
  return Tensor::matrix(rows, cols, std::move(d));
}

Tensor permute_rows(const Tensor& t, std::mt19937_64& rng) {
  std::vector<std::size_t> perm(t.rows());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> d(t.numel());
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) d[i * t.cols() + j] = t(perm[i], j);
  return Tensor::matrix(t.rows(), t.cols(), std::move(d));
}

double coral(const Tensor& a, const Tensor& b) {
  Tape t(false);
  return t.value(coral_distance(t, t.constant(a), t.constant(b))).item();
}

double cmd(const Tensor& a, const Tensor& b, std::size_t k = 5, double lo = -1, double hi = 1) {
  Tape t(false);
  return t.value(cmd_distance(t, t.constant(a), t.constant(b), k, lo, hi)).item();
}

}  // namespace

TEST_CASE("coral worked value and batch size guard") {
  CHECK(coral(Tensor::matrix(2, 1, {-1, 1}), Tensor::matrix(2, 1, {-2, 2})) == doctest::Approx(9.0).epsilon(1e-15));
  CHECK_THROWS_AS(coral(Tensor::matrix(1, 2, {1, 2}), Tensor::matrix(2, 2, {1, 2, 3, 4})), InsufficientBatchError);
}

TEST_CASE("cmd worked value") {
  CHECK(cmd(Tensor::matrix(2, 1, {0, 1}), Tensor::matrix(2, 1, {0.5, 0.5}), 2, 0, 1) ==
        doctest::Approx(0.25).epsilon(1e-15));
  CHECK_THROWS_AS(cmd(Tensor::matrix(2, 1, {0, 1}), Tensor::matrix(2, 1, {0, 1}), 2, 1, 1), ConfigError);
}

TEST_CASE("divergences: zero on identical batches, symmetric, nonnegative, permutation invariant") {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 100; ++rep) {
    auto a = random_batch(rng, 5 + rep % 7, 4);
    auto b = random_batch(rng, 4 + rep % 5, 4, 0.3);
    CHECK(coral(a, a) == 0.0);
    CHECK(cmd(a, a) == 0.0);
    CHECK(coral(a, b) == coral(b, a));
    CHECK(cmd(a, b) == cmd(b, a));
    CHECK(coral(a, b) >= 0.0);
    CHECK(cmd(a, b) >= 0.0);
    auto ap = permute_rows(a, rng), bp = permute_rows(b, rng);
    CHECK(coral(ap, bp) == doctest::Approx(coral(a, b)).epsilon(1e-12));
    CHECK(cmd(ap, bp) == doctest::Approx(cmd(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("coral and cmd gradients pass finite differences in both arguments") {
  std::mt19937_64 rng(4);
  double worst = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto a = random_batch(rng, 6, 3), b = random_batch(rng, 5, 3, 0.4);
    TapeFunction<double> c1 = [&](Tape& t, Var x) { return coral_distance(t, x, t.constant(b)); };
    TapeFunction<double> c2 = [&](Tape& t, Var x) { return coral_distance(t, t.constant(a), x); };
    TapeFunction<double> m1 = [&](Tape& t, Var x) {
      return cmd_distance(t, ops::tanh(t, x), ops::tanh(t, t.constant(b)), 5, -1, 1);
    };
    TapeFunction<double> m2 = [&](Tape& t, Var x) { return cmd_distance(t, t.constant(a), x, 5, -2, 2); };
    for (const auto* f : {&c1, &m1}) worst = std::max(worst, tensor::grad_check<double>(*f, a, 1e-6));
    for (const auto* f : {&c2, &m2}) worst = std::max(worst, tensor::grad_check<double>(*f, b, 1e-6));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("grad_reverse: identity forward, negated scaled backward") {
  Tape t;
  auto h = t.leaf(Tensor(tensor::Shape{2}, {3, -1}));
  auto r = grad_reverse(t, h, 2.0);
  CHECK(t.value(r) == t.value(h));
  auto g = t.backward(ops::sum(t, grad_reverse(t, h, 1.0)));
  CHECK(g.of(h).data()[0] == -1.0);
  CHECK(g.of(h).data()[1] == -1.0);

  TapeFunction<double> f = [](Tape& tp, Var x) { return ops::sum(tp, grad_reverse(tp, x, 0.5)); };
  Tape t2;
  auto p = t2.leaf(Tensor(tensor::Shape{3}, {1, 2, 3}));
  auto gp = t2.backward(ops::sum(t2, grad_reverse(t2, p, 0.5)));
  for (double x : gp.of(p).data()) CHECK(x == -0.5);
}

TEST_CASE("dann loss: confusion, saturation and zero-strength isolation") {
  std::mt19937_64 rng(6);
  ParameterSet ps;
  auto disc = make_discriminator(ps, 1, {1}, rng);
  const auto& last = disc.mlp.layers.back();
  const auto& first = disc.mlp.layers.front();

  auto eval = [&](const ParameterSet& p, const Tensor& hs, const Tensor& ht) {
    Tape t(false);
    auto vars = p.bind(t);
    return t.value(dann_domain_loss(t, vars, disc, t.constant(hs), t.constant(ht), 1.0)).item();
  };

  auto confused = ps;
  for (auto& x : confused.mutable_at(last.weight).mutable_data()) x = 0;
  for (auto& x : confused.mutable_at(last.bias).mutable_data()) x = 0;
  CHECK(eval(confused, random_batch(rng, 4, 1), random_batch(rng, 3, 1)) == doctest::Approx(std::log(2.0)));

  auto sharp = ps;
  sharp.mutable_at(first.weight).mutable_data()[0] = 1;
  sharp.mutable_at(first.bias).mutable_data()[0] = 0;
  sharp.mutable_at(last.weight).mutable_data()[0] = 1;
  sharp.mutable_at(last.bias).mutable_data()[0] = -25;
  CHECK(eval(sharp, Tensor::matrix(2, 1, {-50, -50}), Tensor::matrix(2, 1, {50, 50})) < 1e-9);

  ParameterSet p8;
  auto d8 = make_discriminator(p8, 3, {5}, rng);
  const auto hs = random_batch(rng, 4, 3), ht = random_batch(rng, 4, 3, 0.5);
  Tape t;
  auto vars = p8.bind(t);
  auto xs = t.leaf(hs), xt = t.leaf(ht);
  auto g = t.backward(dann_domain_loss(t, vars, d8, xs, xt, 0.0));
  for (double x : g.of(xs).data()) CHECK(x == 0.0);
  for (double x : g.of(xt).data()) CHECK(x == 0.0);
  bool disc_moves = false;
  for (std::size_t i = 0; i < vars.size(); ++i)
    for (double x : g.of(vars[i]).data()) disc_moves = disc_moves || x != 0.0;
  CHECK(disc_moves);
}

TEST_CASE("dann loss gradients pass finite differences") {
  std::mt19937_64 rng(15);
  double worst = 0;
  for (int rep = 0; rep < 20; ++rep) {
    ParameterSet ps;
    auto disc = make_discriminator(ps, 3, {4}, rng);
    const auto hs = random_batch(rng, 5, 3), ht = random_batch(rng, 4, 3, 0.5);
    models::ParamFunction f = [&](Tape& t, std::span<const Var> p) {
      return dann_domain_loss(t, p, disc, t.constant(hs), t.constant(ht), 1.0);
    };
    worst = std::max(worst, models::grad_check_parameters(f, ps, 1e-6));
    // Strength -1 is the plain gradient of the loss; strength 1 must be its exact negation.
    TapeFunction<double> fx = [&](Tape& t, Var x) {
      auto vars = ps.bind(t);
      return dann_domain_loss(t, vars, disc, x, t.constant(ht), -1.0);
    };
    auto input_grad = [&](double strength) {
      Tape t;
      auto vars = ps.bind(t);
      auto x = t.leaf(hs);
      return t.backward(dann_domain_loss(t, vars, disc, x, t.constant(ht), strength)).of(x);
    };
    const auto plain = input_grad(-1.0), reversed = input_grad(1.0);
    for (std::size_t i = 0; i < plain.numel(); ++i) CHECK(reversed.data()[i] == -plain.data()[i]);
    worst = std::max(worst, tensor::grad_check<double>(fx, hs, 1e-6));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("combined objective arithmetic and affinity in lambda") {
  Tape t;
  auto r = t.constant(Tensor::scalar(0.5));
  auto d = t.constant(Tensor::scalar(2.0));
  CHECK(t.value(combined_objective(t, r, d, 0.1)).item() == doctest::Approx(0.7));
  CHECK(t.value(combined_objective(t, r, d, 0.0)).item() == 0.5);

  std::mt19937_64 rng(3);
  const auto a = random_batch(rng, 6, 4), b = random_batch(rng, 6, 4, 0.7);
  Tape f(false);
  auto recon = f.constant(Tensor::scalar(0.37));
  auto dist = coral_distance(f, f.constant(a), f.constant(b));
  const double dv = f.value(dist).item();
  for (double lam : {0.0, 1e-4, 1e-2, 1e-1}) {
    CHECK(f.value(combined_objective(f, recon, dist, lam)).item() == 0.37 + lam * dv);
  }
  const double o1 = f.value(combined_objective(f, recon, dist, 0.01)).item();
  const double o2 = f.value(combined_objective(f, recon, dist, 0.1)).item();
  CHECK((o2 - o1) / 0.09 == doctest::Approx(dv).epsilon(1e-10));
}

TEST_CASE("conditioner receives gradient from both objective terms") {
  models::ModelConfig cfg;
  cfg.width = 6;
  cfg.conditioner.hidden = {6};
  cfg.conditioner.encoding.frequencies = 3;
  models::SurrogateModel m(cfg, 3);
  const auto enc = cfg.conditioner.encoding;
  auto s1 = datagen::solve_plate_heat({310, 290, 1.0, 0.2}, 8, 1);
  auto s2 = datagen::solve_plate_heat({390, 260, 3.0, 0.3}, 8, 2);
  auto g1 = models::make_graph_input(s1, {0.1, 0.4, 0.2, 0.25}, enc);
  auto g2 = models::make_graph_input(s2, {0.9, 0.1, 0.7, 0.5}, enc);
  const models::GraphInput* src[] = {&g1, &g2};
  auto bs = models::make_batch(std::span<const models::GraphInput* const>(src));
  auto tgt = sinusoidal(Tensor::matrix(2, 4, {0.3, 0.3, 0.8, 0.9, 0.5, 0.6, 0.1, 0.95}), enc);

  UdaConfig coral_cfg{Kind::coral, 0.1};
  UdaConfig cmd_cfg{Kind::cmd, 0.1};
  for (const auto* ucfg : {&coral_cfg, &cmd_cfg}) {
    models::ParamFunction recon = [&](Tape& t, std::span<const Var> p) {
      auto out = m.forward(t, p, bs);
      return ops::mean(t, ops::mul(t, out.prediction, out.prediction));
    };
    models::ParamFunction da = [&](Tape& t, std::span<const Var> p) {
      auto zs = m.encode_condition(t, p, bs.cond_features);
      auto zt = m.encode_condition(t, p, tgt);
      return ops::scale(t, domain_distance(t, *ucfg, {}, nullptr, zs, zt), ucfg->lambda);
    };
    for (const auto* f : {&recon, &da}) {
      Tape t;
      auto p = m.parameters().bind(t);
      auto g = t.backward((*f)(t, p));
      double norm = 0;
      for (std::size_t i = m.conditioner_begin(); i < m.conditioner_end(); ++i)
        for (double x : g[i].data()) norm += x * x;
      CHECK(norm > 0.0);
      CHECK(models::grad_check_parameters(*f, m.parameters(), 1e-6, m.conditioner_begin(), m.conditioner_end()) < 1e-5);
    }
  }
}
