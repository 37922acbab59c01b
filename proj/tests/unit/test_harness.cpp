#include <doctest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "meshshift/common/binary_io.hpp"
#include "meshshift/datagen/corpus.hpp"
#include "meshshift/datagen/split.hpp"
#include "meshshift/harness/report.hpp"
#include "meshshift/harness/sweep.hpp"
#include "test_support.hpp"

using namespace meshshift;
using namespace meshshift::harness;
using datagen::Difficulty;
using tensor::Tensor;

namespace {

const datagen::Corpus& plate_corpus() {
  static const auto c = datagen::build_corpus(datagen::plate_heat_task(8), 120, 7, 1);
  return c;
}

const SplitData& plate_split(Difficulty d = Difficulty::medium) {
  static std::map<Difficulty, SplitData> cache;
  auto it = cache.find(d);
  if (it == cache.end()) {
    const auto& c = plate_corpus();
    const auto split = datagen::split_domains(c.dominant_values(), c.task, d, datagen::default_boundaries(c.task), 3);
    it = cache.emplace(d, make_split_data(c.task, split, c.samples)).first;
  }
  return it->second;
}

TrainConfig small_config(const SplitData& data) {
  TrainConfig c;
  c.model.architecture = models::Architecture::sage;
  c.model.conditioning = models::Conditioning::film;
  c.model.width = 16;
  c.model.layers = 2;
  c.model.coord_dim = 2;
  c.model.num_params = data.task.params.size();
  c.model.num_fields = data.task.field_names.size();
  c.max_epochs = 2;
  c.eval_every = 1;
  c.profile = Profile::desk;
  c.apply_profile();
  return c;
}

}  // namespace

TEST_CASE("normalization is a z-score over source-train") {
  const auto& d = plate_split();
  const std::size_t f = d.stats.num_fields();
  std::vector<double> sum(f, 0.0), sq(f, 0.0);
  std::size_t n = 0;
  for (const auto& s : d.source_train) {
    for (std::size_t i = 0; i < s.normalized.rows(); ++i)
      for (std::size_t k = 0; k < f; ++k) {
        sum[k] += s.normalized(i, k);
        sq[k] += s.normalized(i, k) * s.normalized(i, k);
      }
    n += s.normalized.rows();
  }
  for (std::size_t k = 0; k < f; ++k) {
    CHECK(std::abs(sum[k] / n) < 1e-10);
    CHECK(std::abs(sq[k] / n - 1.0) < 1e-8);
  }

  const auto& raw = d.source_train.front().raw;
  const auto back = denormalize_fields(normalize_fields(raw, d.stats), d.stats);
  for (std::size_t i = 0; i < raw.numel(); ++i) {
    const std::size_t k = i % f;
    const double scale = std::max(std::abs(raw.data()[i]), std::abs(d.stats.mean[k]) + d.stats.std[k]);
    CHECK(std::abs(back.data()[i] - raw.data()[i]) <= 4 * std::numeric_limits<double>::epsilon() * scale);
  }
}

TEST_CASE("target fields are shifted under source statistics") {
  const auto& d = plate_split();
  selection::OracleAudit audit;
  double temp_mean = 0.0;
  std::size_t n = 0;
  for (const auto& id : d.target_test_ids) {
    const auto z = normalize_fields(d.target_labels.open(id, selection::AccessContext::final_report, audit), d.stats);
    for (std::size_t i = 0; i < z.rows(); ++i) temp_mean += z(i, 0);
    n += z.rows();
  }
  temp_mean /= static_cast<double>(n);
  MESSAGE("target temperature mean in source z-units: " << temp_mean);
  CHECK(std::abs(temp_mean) > 0.0);
  CHECK(audit.non_oracle_reads() == 0);
  CHECK_THROWS_AS(d.target_labels.open(d.target_test_ids.front(), selection::AccessContext::training, audit),
                  PolicyError);
}

TEST_CASE("constant fields are rejected") {
  datagen::MeshSample s;
  s.dim = 1;
  s.coords = {0.0, 1.0};
  s.num_fields = 1;
  s.fields = {2.0, 2.0};
  std::vector<const datagen::MeshSample*> v{&s};
  CHECK_THROWS_AS(compute_stats(v), DegenerateFieldError);
}

TEST_CASE("metric base cases") {
  datagen::TaskSpec task;
  task.field_names = {"u"};
  NormalizationStats st{{0.0}, {2.0}};

  auto one = [](double v) { return Tensor::matrix(1, 1, {v}); };
  auto m = compute_metrics(task, {"a"}, {one(2.0)}, {one(1.0)}, st, "t");
  CHECK(m.rmse[0] == doctest::Approx(1.0));
  CHECK(m.nrmse == doctest::Approx(0.5));
  CHECK_FALSE(m.deformation_error.has_value());

  auto zero = compute_metrics(task, {"a"}, {one(2.0)}, {one(2.0)}, st, "t");
  CHECK(zero.rmse[0] == 0.0);
  CHECK(zero.nrmse == 0.0);

  // Per-graph RMSEs 1 and 3 average to 2.
  auto two = compute_metrics(task, {"a", "b"}, {Tensor::matrix(2, 1, {0.0, 0.0}), one(0.0)},
                             {Tensor::matrix(2, 1, {1.0, -1.0}), one(3.0)}, st, "t");
  CHECK(two.rmse[0] == doctest::Approx(2.0));
  CHECK(two.sample_nrmse == std::vector<double>{0.5, 1.5});

  CHECK_THROWS_AS(compute_metrics(task, {"a"}, {Tensor::matrix(1, 2, {1.0, 2.0})}, {Tensor::matrix(1, 2, {1.0, 2.0})},
                                  st, "t"),
                  FieldSchemaError);
}

TEST_CASE("deformation error follows the deflection field") {
  auto task = datagen::rod_bending_task(4);
  NormalizationStats st{{0.0, 0.0}, {1.0, 1.0}};
  auto y = Tensor::matrix(2, 2, {0.0, 5.0, 1.0, 5.0});
  auto p = Tensor::matrix(2, 2, {0.5, 5.0, 0.0, 5.0});
  auto m = compute_metrics(task, {"a"}, {y}, {p}, st, "t");
  REQUIRE(m.deformation_error.has_value());
  CHECK(*m.deformation_error == doctest::Approx(0.75));
}

TEST_CASE("metrics grow under a positive perturbation and match the mean predictor anchor") {
  const auto& d = plate_split();
  std::vector<std::string> ids;
  std::vector<Tensor> truth, mean_pred, near, nearer;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.01, 0.02);
  for (const auto& s : d.source_train) {
    ids.push_back(s.id);
    truth.push_back(s.raw);
    auto mp = denormalize_fields(Tensor::zeros(s.raw.rows(), s.raw.cols()), d.stats);
    mean_pred.push_back(mp);
    auto a = s.raw;
    for (auto& x : a.mutable_data()) x += u(rng);
    auto b = a;
    for (auto& x : b.mutable_data()) x += 0.05;
    near.push_back(a);
    nearer.push_back(b);
  }
  const auto m0 = compute_metrics(d.task, ids, truth, near, d.stats, "s");
  const auto m1 = compute_metrics(d.task, ids, truth, nearer, d.stats, "s");
  for (std::size_t k = 0; k < m0.rmse.size(); ++k) CHECK(m1.rmse[k] > m0.rmse[k]);

  // Pooled over all source-train nodes, the mean predictor has unit normalized RMSE per field.
  const auto anchor = compute_metrics(d.task, ids, truth, mean_pred, d.stats, "s");
  const double fields = static_cast<double>(d.task.field_names.size());
  double pooled = 0.0;
  for (std::size_t k = 0; k < d.stats.num_fields(); ++k) {
    double sq = 0.0;
    std::size_t n = 0;
    for (const auto& s : d.source_train) {
      for (std::size_t i = 0; i < s.normalized.rows(); ++i) sq += s.normalized(i, k) * s.normalized(i, k);
      n += s.normalized.rows();
    }
    pooled += std::sqrt(sq / static_cast<double>(n));
  }
  MESSAGE("mean-predictor NRMSE: per-graph mean of roots " << anchor.nrmse << ", pooled " << pooled << ", fields "
                                                            << fields);
  CHECK(std::abs(pooled - fields) <= 0.05 * fields);
  // The per-graph mean of roots can only be smaller (Jensen).
  CHECK(anchor.nrmse <= pooled + 1e-12);
}

TEST_CASE("optimizer pieces") {
  CHECK(cosine_lr(1e-3, 0, 100) == doctest::Approx(1e-3));
  CHECK(cosine_lr(1e-3, 50, 100) == doctest::Approx(5e-4));
  CHECK(cosine_lr(1e-3, 100, 100) == 0.0);

  std::vector<Tensor> p{Tensor::matrix(1, 2, {1.0, -1.0})};
  std::vector<Tensor> g{Tensor::matrix(1, 2, {0.3, -4.0})};
  AdamW opt(p, {0.9, 0.999, 1e-8, 0.0});
  opt.step(p, g, 0.1);
  // The first bias-corrected Adam step has magnitude lr per coordinate.
  CHECK(p[0](0, 0) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(p[0](0, 1) == doctest::Approx(-0.9).epsilon(1e-6));

  std::vector<Tensor> q{Tensor::matrix(1, 1, {2.0})};
  AdamW decay(q, {0.9, 0.999, 1e-8, 0.5});
  decay.step(q, {Tensor::matrix(1, 1, {0.0})}, 0.1);
  CHECK(q[0].item() == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0));

  std::vector<Tensor> e{Tensor::scalar(0.0)};
  Ema ema(e, 0.95);
  ema.update({Tensor::scalar(1.0)});
  CHECK(ema.shadow()[0].item() == doctest::Approx(0.05));
}

TEST_CASE("profiles and validation") {
  TrainConfig c = small_config(plate_split());
  c.max_epochs = 3000;
  c.patience = 500;
  c.apply_profile();
  CHECK(c.max_epochs == 300);
  CHECK(c.patience == 60);
  c.ema_decay = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  nlohmann::json j = small_config(plate_split());
  CHECK(j.get<TrainConfig>() == small_config(plate_split()));
}

TEST_CASE("short training run is finite, deterministic and cached") {
  const auto& d = plate_split();
  auto cfg = small_config(d);
  cfg.uda.kind = uda::Kind::coral;
  cfg.uda.lambda = 0.1;
  const auto t0 = std::chrono::steady_clock::now();
  const auto a = train_run(cfg, d, "a");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  MESSAGE("2 epochs took " << secs << " s");
  REQUIRE(a.stable);
  REQUIRE(a.model.has_value());
  CHECK(a.log.size() == 2);
  for (const auto& e : a.log) {
    CHECK(std::isfinite(e.total));
    CHECK(e.da > 0.0);
  }
  CHECK(a.source_val_losses.size() == d.source_val.size());
  CHECK(a.target_train_z.rows() == d.target_train.size());

  const auto b = train_run(cfg, d, "b");
  CHECK(b.model->parameters() == a.model->parameters());
  CHECK(b.source_val_losses == a.source_val_losses);

  const auto cache = decode_cache(encode_cache(a), "mem");
  CHECK(cache.source_val_losses == a.source_val_losses);
  CHECK(cache.source_val_z == a.source_val_z);
  CHECK(cache.target_train_z == a.target_train_z);
  auto bytes = encode_cache(a);
  bytes.resize(bytes.size() - 3);
  CHECK_THROWS_AS(decode_cache(bytes, "mem"), FormatError);
}

TEST_CASE("lambda zero leaves training identical to supervised training") {
  const auto& d = plate_split();
  auto plain = small_config(d);
  auto zero = plain;
  zero.uda.kind = uda::Kind::cmd;
  zero.uda.lambda = 0.0;
  const auto a = train_run(plain, d);
  const auto b = train_run(zero, d);
  CHECK(a.model->parameters() == b.model->parameters());
  for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].recon == b.log[i].recon);
}

TEST_CASE("a diverging run is flagged unstable with diagnostics") {
  const auto& d = plate_split();
  auto cfg = small_config(d);
  cfg.learning_rate = 1e300;
  cfg.grad_clip = 1e300;
  const auto r = train_run(cfg, d, "boom");
  CHECK_FALSE(r.stable);
  CHECK(r.diagnostics.contains("reason"));
  const auto rec = make_record(r, std::nullopt);
  CHECK_FALSE(rec.stable);
}

TEST_CASE("sweep expansion") {
  SweepSpec spec;
  spec.base = small_config(plate_split());
  spec.kinds = {uda::Kind::coral};
  spec.lambdas = desk_lambda_grid();
  spec.seeds = {0, 1, 2, 3};
  CHECK(expand_sweep(spec).size() == 20);
  CHECK(paper_lambda_grid().size() == 9);
  spec.lambdas = paper_lambda_grid();
  spec.kinds = {uda::Kind::coral, uda::Kind::cmd, uda::Kind::dann};
  spec.seeds = {0};
  CHECK(expand_sweep(spec).size() == 28);
  CHECK(run_id(models::Architecture::sage, uda::Kind::coral, 1e-2, 0) == "sage-coral-1e-02-s0");
  CHECK(run_id(models::Architecture::sage, uda::Kind::coral, 0.0, 3) == "sage-none-0-s3");
}

TEST_CASE("report statistics and difference columns") {
  CHECK(mean_std({2.0}).second == 0.0);
  CHECK(mean_std({1.0, 3.0}).second == doctest::Approx(std::sqrt(2.0)));

  auto rec = [](std::string id, std::string kind, std::uint64_t seed, double val, double tgt) {
    selection::RunRecord r;
    r.run_id = std::move(id);
    r.architecture = "sage";
    r.kind = std::move(kind);
    r.seed = seed;
    r.source_val_losses = {val, val};
    r.source_val_weights = {1.0, 1.0};
    r.target_test_nrmse = selection::Sealed<double>(tgt, r.run_id);
    return r;
  };
  DifficultyRuns dr;
  dr.difficulty = Difficulty::medium;
  dr.records = {rec("sage-none-0-s0", "none", 0, 0.1, 2.0), rec("sage-coral-1e-01-s0", "coral", 0, 0.2, 1.5),
                rec("sage-coral-1e-02-s0", "coral", 0, 0.3, 2.5)};
  for (const auto& r : dr.records) dr.source_test_nrmse[r.run_id] = r.source_val_losses[0];
  selection::OracleAudit audit;
  const auto rep = build_report({dr}, {selection::Strategy::SB, selection::Strategy::TB}, audit);
  CHECK(rep.quorum_failures.empty());
  const SummaryRow* sb = nullptr;
  const SummaryRow* tb = nullptr;
  for (const auto& r : rep.summary) {
    if (r.domain != "target" || r.kind != "coral") continue;
    (r.strategy == "SB" ? sb : tb) = &r;
  }
  REQUIRE(sb);
  REQUIRE(tb);
  CHECK(sb->mean == 2.0);
  CHECK(sb->difference == 0.0);
  CHECK(tb->mean == 1.5);
  CHECK(tb->difference == doctest::Approx(-0.5));
  CHECK(tb->std == 0.0);
  CHECK(audit.non_oracle_reads() == 0);
  REQUIRE(rep.scaling.size() == 1);
  CHECK(rep.scaling[0].tb_target == 1.5);
  CHECK(summary_csv(rep).find("medium,sage,coral,TB,target,1.5,0,1,-0.5,0") != std::string::npos);
}

TEST_CASE("sweep writes run directories") {
  test_support::TempDir tmp;
  const auto& d = plate_split();
  SweepSpec spec;
  spec.base = small_config(d);
  spec.base.max_epochs = 1;
  spec.kinds = {uda::Kind::dann};
  spec.lambdas = {1e-2};
  spec.seeds = {0};
  spec.workers = 2;
  selection::OracleAudit audit;
  const auto runs = run_sweep(spec, d, tmp.path, audit);
  REQUIRE(runs.size() == 2);
  for (const auto& r : runs) {
    CHECK(r.error.empty());
    REQUIRE(r.target_test.has_value());
    const auto dir = tmp.path / r.result.run_id;
    for (auto f : {"config.json", "checkpoint.bin", "checkpoint.json", "loss_curve.csv", "cache.bin", "metrics.json"}) {
      CHECK(std::filesystem::exists(dir / f));
    }
    auto loaded = models::load_checkpoint(dir / "checkpoint");
    CHECK(loaded.parameters() == r.result.model->parameters());
  }
  CHECK(audit.non_oracle_reads() == 0);
  CHECK(audit.total() == 2 * d.target_test.size());
}
