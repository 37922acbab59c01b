#include "meshshift/harness/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "meshshift/common/binary_io.hpp"
#include "meshshift/datagen/corpus.hpp"
#include "meshshift/harness/report.hpp"
#include "meshshift/tensor/ops.hpp"

namespace meshshift::harness {

namespace ops = meshshift::tensor;
using models::GraphInput;
using models::SurrogateModel;
using tensor::Tape;
using tensor::Var;

std::string to_string(Profile p) { return p == Profile::desk ? "desk" : "paper"; }

Profile profile_from_string(const std::string& s) {
  if (s == "desk") return Profile::desk;
  if (s == "paper") return Profile::paper;
  throw ConfigError("unknown profile '" + s + "' (expected paper or desk)");
}

void TrainConfig::apply_profile() {
  if (profile == Profile::desk) {
    max_epochs = std::min<std::size_t>(max_epochs, 300);
    patience = std::min<std::size_t>(patience, 60);
  }
}

void TrainConfig::validate() const {
  model.validate();
  uda.validate();
  if (!(learning_rate > 0) || !(grad_clip > 0) || batch_size < 2 || max_epochs == 0 || eval_every == 0 ||
      patience == 0 || !(adamw.eps > 0) || !(adamw.weight_decay >= 0)) {
    throw ConfigError("training hyperparameters must be positive (batch size at least 2)");
  }
  if (!(ema_decay > 0 && ema_decay < 1)) throw ConfigError("EMA decay must lie in (0, 1)");
  if (!(adamw.beta1 >= 0 && adamw.beta1 < 1 && adamw.beta2 >= 0 && adamw.beta2 < 1)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (profile == Profile::desk && (max_epochs > 300 || patience > 60)) {
    throw ConfigError("desk profile allows at most 300 epochs and patience 60");
  }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"model", c.model},
       {"uda", c.uda},
       {"learning_rate", c.learning_rate},
       {"beta1", c.adamw.beta1},
       {"beta2", c.adamw.beta2},
       {"eps", c.adamw.eps},
       {"weight_decay", c.adamw.weight_decay},
       {"grad_clip", c.grad_clip},
       {"batch_size", c.batch_size},
       {"max_epochs", c.max_epochs},
       {"eval_every", c.eval_every},
       {"patience", c.patience},
       {"ema_decay", c.ema_decay},
       {"seed", c.seed},
       {"profile", to_string(c.profile)}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.model = j.at("model").get<models::ModelConfig>();
  c.uda = j.at("uda").get<uda::UdaConfig>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.adamw.beta1 = j.at("beta1").get<double>();
  c.adamw.beta2 = j.at("beta2").get<double>();
  c.adamw.eps = j.at("eps").get<double>();
  c.adamw.weight_decay = j.at("weight_decay").get<double>();
  c.grad_clip = j.at("grad_clip").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.eval_every = j.at("eval_every").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.ema_decay = j.at("ema_decay").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.profile = profile_from_string(j.at("profile").get<std::string>());
}

std::string loss_curve_csv(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os << "epoch,recon,da,total,source_val,source_val_ema\n";
  for (const auto& e : log) {
    os << e.epoch << ',' << format_number(e.recon) << ',' << format_number(e.da) << ',' << format_number(e.total)
       << ',' << (e.source_val ? format_number(*e.source_val) : "") << ','
       << (e.source_val_ema ? format_number(*e.source_val_ema) : "") << '\n';
  }
  return os.str();
}

Inference infer(const SurrogateModel& model, std::span<const GraphInput* const> graphs, std::size_t chunk) {
  if (graphs.empty()) throw EmptyInputError("inference over zero graphs");
  Inference out;
  const std::size_t latent = model.config().conditioner.latent;
  std::vector<double> z;
  z.reserve(graphs.size() * latent);
  for (std::size_t begin = 0; begin < graphs.size(); begin += chunk) {
    const auto part = graphs.subspan(begin, std::min(chunk, graphs.size() - begin));
    const auto batch = models::make_batch(part);
    Tape tape(false);
    const auto p = model.parameters().bind(tape);
    const auto o = model.forward(tape, p, batch);
    const auto& pred = tape.value(o.prediction);
    const std::size_t f = pred.cols();
    for (std::size_t g = 0; g < part.size(); ++g) {
      const std::size_t r0 = batch.node_offsets[g], r1 = batch.node_offsets[g + 1];
      std::vector<double> rows(pred.data().begin() + r0 * f, pred.data().begin() + r1 * f);
      out.predictions.push_back(Tensor::matrix(r1 - r0, f, std::move(rows)));
    }
    const auto zd = tape.value(o.z).data();
    z.insert(z.end(), zd.begin(), zd.end());
  }
  out.z = Tensor::matrix(graphs.size(), latent, std::move(z));
  return out;
}

namespace {

Tensor stack_conditions(std::span<const GraphInput* const> graphs) {
  const std::size_t w = graphs.front()->cond_features.cols();
  std::vector<double> d;
  d.reserve(graphs.size() * w);
  for (const auto* g : graphs) {
    const auto c = g->cond_features.data();
    d.insert(d.end(), c.begin(), c.end());
  }
  return Tensor::matrix(graphs.size(), w, std::move(d));
}

std::vector<const GraphInput*> inputs_of(std::span<const LabeledGraph> samples) {
  std::vector<const GraphInput*> out;
  for (const auto& s : samples) out.push_back(&s.input);
  return out;
}

std::vector<const GraphInput*> inputs_of(const std::vector<GraphInput>& samples) {
  std::vector<const GraphInput*> out;
  for (const auto& s : samples) out.push_back(&s);
  return out;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Source batches of one epoch; a trailing batch of one sample joins the previous batch.
std::vector<std::vector<std::size_t>> epoch_batches(const std::vector<std::size_t>& order, std::size_t bs) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += bs) {
    out.emplace_back(order.begin() + i, order.begin() + std::min(order.size(), i + bs));
  }
  if (out.size() > 1 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back().front());
    out.pop_back();
  }
  return out;
}

std::size_t batches_per_epoch(std::size_t n, std::size_t bs) {
  std::vector<std::size_t> order(n);
  return epoch_batches(order, bs).size();
}

/// Cycles through reshuffled permutations of the target pool.
class TargetSampler {
 public:
  TargetSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    std::iota(order_.begin(), order_.end(), 0);
    pos_ = n;
  }
  std::vector<std::size_t> next(std::size_t k) {
    std::vector<std::size_t> out;
    while (out.size() < k) {
      if (pos_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::mt19937_64 rng_;
  std::size_t pos_;
};

void check_compatible(const TrainConfig& cfg, const SplitData& data) {
  const auto& m = cfg.model;
  if (m.num_fields != data.task.field_names.size() || m.num_params != data.task.params.size() || m.coord_dim != data.task.dim() ||
      m.conditioner.encoding != data.encoding) {
    throw ConfigError("model configuration does not match the task (fields, parameters or encoding)");
  }
  if (!data.source_train.empty() && data.source_train.front().input.node_features.cols() !=
                                        m.coord_dim * m.conditioner.encoding.width_per_input()) {
    throw ConfigError("model coord_dim does not match the mesh dimension");
  }
  if (data.source_train.size() < 2) throw InsufficientDataError("training needs at least 2 source-train samples");
  if (data.source_val.size() < 2) throw InsufficientDataError("training needs at least 2 source-val samples");
  if (cfg.uda.kind != uda::Kind::none && data.target_train.size() < 2) {
    throw InsufficientDataError("domain adaptation needs at least 2 target-train samples");
  }
}

}  // namespace

Tensor encode_conditions(const SurrogateModel& model, std::span<const GraphInput* const> graphs) {
  if (graphs.empty()) throw EmptyInputError("encoding zero conditions");
  Tape tape(false);
  const auto p = model.parameters().bind(tape);
  return tape.value(model.encode_condition(tape, p, stack_conditions(graphs)));
}

std::vector<double> per_sample_loss(const std::vector<Tensor>& predictions, std::span<const LabeledGraph> truth) {
  if (predictions.size() != truth.size()) throw ShapeError("one prediction per labeled sample is required");
  std::vector<double> out;
  out.reserve(truth.size());
  for (std::size_t g = 0; g < truth.size(); ++g) {
    const auto p = predictions[g].data();
    const auto y = truth[g].normalized.data();
    if (p.size() != y.size()) throw FieldSchemaError("prediction shape differs from sample " + truth[g].id);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - y[i]) * (p[i] - y[i]);
    out.push_back(s / static_cast<double>(p.size()));
  }
  return out;
}

RunResult train_run(const TrainConfig& cfg, const SplitData& data, const std::string& run_id) {
  cfg.validate();
  check_compatible(cfg, data);

  RunResult r;
  r.run_id = run_id;
  r.config = cfg;

  SurrogateModel model(cfg.model, datagen::derive_seed(cfg.seed, 1));
  models::ParameterSet disc_params;
  std::optional<uda::Discriminator> disc;
  if (cfg.uda.kind == uda::Kind::dann) {
    std::mt19937_64 drng(datagen::derive_seed(cfg.seed, 2));
    disc = uda::make_discriminator(disc_params, cfg.model.conditioner.latent, cfg.uda.dann_hidden, drng);
  }
  const bool adapt = cfg.uda.kind != uda::Kind::none;

  std::mt19937_64 shuffle_rng(datagen::derive_seed(cfg.seed, 3));
  TargetSampler target_sampler(data.target_train.size(), datagen::derive_seed(cfg.seed, 4));

  AdamW opt_model(model.parameters().tensors(), cfg.adamw);
  AdamW opt_disc(disc_params.tensors(), cfg.adamw);
  Ema ema(model.parameters().tensors(), cfg.ema_decay);

  const std::size_t n_src = data.source_train.size();
  const std::size_t total_steps = batches_per_epoch(n_src, cfg.batch_size) * cfg.max_epochs;
  const std::size_t n_model = model.parameters().size();
  const auto val_inputs = inputs_of(std::span<const LabeledGraph>(data.source_val));

  std::vector<std::size_t> order(n_src);
  std::iota(order.begin(), order.end(), 0);

  double best_ema = std::numeric_limits<double>::infinity();
  double best_raw = std::numeric_limits<double>::infinity();
  std::size_t last_improvement = 0;
  std::optional<SurrogateModel> best;
  std::size_t step = 0;

  auto eval_loss = [&](const SurrogateModel& m) {
    return mean_of(per_sample_loss(infer(m, val_inputs).predictions, data.source_val));
  };

  std::size_t epoch = 1;
  try {
    for (; epoch <= cfg.max_epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      EpochLog log;
      log.epoch = epoch;
      const auto batches = epoch_batches(order, cfg.batch_size);
      for (const auto& idx : batches) {
        std::vector<const GraphInput*> graphs;
        std::vector<double> labels;
        for (auto i : idx) {
          graphs.push_back(&data.source_train[i].input);
          const auto y = data.source_train[i].normalized.data();
          labels.insert(labels.end(), y.begin(), y.end());
        }
        const auto batch = models::make_batch(graphs);

        Tape tape;
        const auto pm = model.parameters().bind(tape);
        const auto pd = disc_params.bind(tape);
        const auto out = model.forward(tape, pm, batch);
        const std::size_t f = cfg.model.num_fields;
        Var y = tape.constant(Tensor::matrix(batch.num_nodes, f, std::move(labels)));
        Var diff = ops::sub(tape, out.prediction, y);
        Var recon = ops::mean(tape, ops::mul(tape, diff, diff));
        Var total = recon;
        double da_value = 0.0;
        if (adapt) {
          const auto tidx = target_sampler.next(std::min(cfg.batch_size, data.target_train.size()));
          std::vector<const GraphInput*> tg;
          for (auto i : tidx) tg.push_back(&data.target_train[i]);
          Var zt = model.encode_condition(tape, pm, stack_conditions(tg));
          Var da = uda::domain_distance(tape, cfg.uda, pd, disc ? &*disc : nullptr, out.z, zt);
          total = uda::combined_objective(tape, recon, da, cfg.uda.lambda);
          da_value = tape.value(da).item();
        }
        const double recon_value = tape.value(recon).item();
        const double total_value = tape.value(total).item();
        if (!std::isfinite(total_value)) throw NumericError("non-finite training loss");

        auto grads = tape.backward(total);
        auto& g = grads.tensors();
        ops::clip_global_norm(std::span<Tensor>(g), cfg.grad_clip);
        const double lr = cosine_lr(cfg.learning_rate, step, total_steps);
        std::vector<Tensor> gm(std::make_move_iterator(g.begin()), std::make_move_iterator(g.begin() + n_model));
        opt_model.step(model.parameters().tensors(), gm, lr);
        if (disc) {
          std::vector<Tensor> gd(std::make_move_iterator(g.begin() + n_model), std::make_move_iterator(g.end()));
          opt_disc.step(disc_params.tensors(), gd, lr);
        }
        ema.update(model.parameters().tensors());
        ++step;

        log.recon += recon_value;
        log.da += da_value;
        log.total += total_value;
      }
      const double nb = static_cast<double>(batches.size());
      log.recon /= nb;
      log.da /= nb;
      log.total /= nb;

      const bool eval_now = epoch % cfg.eval_every == 0 || epoch == cfg.max_epochs;
      bool stop = false;
      if (eval_now) {
        const double raw = eval_loss(model);
        SurrogateModel shadow = model;
        shadow.parameters().tensors() = ema.shadow();
        const double smoothed = eval_loss(shadow);
        log.source_val = raw;
        log.source_val_ema = smoothed;
        if (smoothed < best_ema) {
          best_ema = smoothed;
          best = std::move(shadow);
          r.best_epoch = epoch;
        }
        if (raw < best_raw) {
          best_raw = raw;
          last_improvement = epoch;
        } else if (epoch - last_improvement >= cfg.patience) {
          stop = true;
        }
      }
      r.log.push_back(log);
      r.epochs_run = epoch;
      if (stop) break;
    }
  } catch (const NumericError& e) {
    r.stable = false;
    r.epochs_run = epoch;
    r.diagnostics = {{"reason", e.what()},
                     {"epoch", epoch},
                     {"step", step},
                     {"learning_rate", cosine_lr(cfg.learning_rate, step, total_steps)},
                     {"last_completed_epoch", r.log.empty() ? nlohmann::json(nullptr)
                                                            : nlohmann::json({{"epoch", r.log.back().epoch},
                                                                              {"recon", r.log.back().recon},
                                                                              {"da", r.log.back().da},
                                                                              {"total", r.log.back().total}})},
                     {"parameters_finite", model.parameters().all_finite()}};
    return r;
  }

  r.best_source_val = best_ema;
  r.model = std::move(best);
  const auto& m = *r.model;
  r.source_val_losses = per_sample_loss(infer(m, val_inputs).predictions, data.source_val);
  r.source_val_z = encode_conditions(m, val_inputs);
  if (!data.target_train.empty()) r.target_train_z = encode_conditions(m, inputs_of(data.target_train));
  return r;
}

selection::RunRecord make_record(const RunResult& r, std::optional<double> target_test_nrmse) {
  selection::RunRecord rec;
  rec.run_id = r.run_id;
  rec.architecture = models::to_string(r.config.model.architecture);
  rec.kind = uda::to_string(r.config.uda.kind);
  rec.lambda = r.config.uda.lambda;
  rec.seed = r.config.seed;
  rec.stable = r.stable && r.model.has_value();
  rec.source_val_losses = r.source_val_losses;
  rec.source_val_z = r.source_val_z;
  rec.target_train_z = r.target_train_z;
  if (target_test_nrmse) {
    rec.target_test_nrmse = selection::Sealed<double>(*target_test_nrmse, r.run_id + "/target_test_nrmse");
  }
  return rec;
}

MetricsReport evaluate_source(const SurrogateModel& model, const SplitData& data, std::span<const LabeledGraph> samples,
                              const std::string& domain) {
  const auto inputs = inputs_of(samples);
  auto inf = infer(model, inputs);
  std::vector<std::string> ids;
  std::vector<Tensor> truth, pred;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    ids.push_back(samples[i].id);
    truth.push_back(samples[i].raw);
    pred.push_back(denormalize_fields(inf.predictions[i], data.stats));
  }
  return compute_metrics(data.task, ids, truth, pred, data.stats, domain);
}

MetricsReport evaluate_target(const SurrogateModel& model, const SplitData& data, selection::AccessContext ctx,
                              selection::OracleAudit& audit) {
  auto inf = infer(model, inputs_of(data.target_test));
  std::vector<Tensor> truth, pred;
  for (std::size_t i = 0; i < data.target_test.size(); ++i) {
    truth.push_back(data.target_labels.open(data.target_test_ids[i], ctx, audit));
    pred.push_back(denormalize_fields(inf.predictions[i], data.stats));
  }
  return compute_metrics(data.task, data.target_test_ids, truth, pred, data.stats, "target_test");
}

std::vector<char> encode_cache(const RunResult& r) {
  io::ByteWriter w(io::RecordType::cache);
  const std::size_t m = r.source_val_z.cols();
  const bool has_target = r.target_train_z.rank() == 2 && r.target_train_z.cols() == m;
  w.u64(r.source_val_losses.size());
  w.u64(m);
  w.u64(has_target ? r.target_train_z.rows() : 0);
  w.f64s(r.source_val_losses);
  w.f64s(r.source_val_z.data());
  if (has_target) w.f64s(r.target_train_z.data());
  return w.bytes();
}

CachedRun decode_cache(std::vector<char> bytes, const std::string& origin) {
  io::ByteReader rd(std::move(bytes), io::RecordType::cache, origin);
  const auto b = rd.u64();
  const auto m = rd.u64();
  const auto t = rd.u64();
  if (b == 0 || m == 0) rd.fail("cache holds no source-val samples");
  const auto limit = rd.remaining() / 8;
  if (b > limit || t > limit || b + t > limit || m > (limit - b) / (b + t)) {
    rd.fail("cache counts exceed the file size");
  }
  CachedRun c;
  c.source_val_losses = rd.f64s(b);
  c.source_val_z = Tensor::matrix(b, m, rd.f64s(b * m));
  if (t > 0) c.target_train_z = Tensor::matrix(t, m, rd.f64s(t * m));
  rd.expect_end();
  return c;
}

}  // namespace meshshift::harness
