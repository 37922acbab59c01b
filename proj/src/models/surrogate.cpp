#include "meshshift/models/surrogate.hpp"

#include "meshshift/common/binary_io.hpp"
#include "meshshift/tensor/ops.hpp"

namespace meshshift::models {

namespace ops = meshshift::tensor;

std::string to_string(Architecture a) { return a == Architecture::pointnet ? "pointnet" : "sage"; }
std::string to_string(Conditioning c) { return c == Conditioning::film ? "film" : "concat"; }

Architecture architecture_from_string(const std::string& s) {
  if (s == "pointnet") return Architecture::pointnet;
  if (s == "sage") return Architecture::sage;
  throw ConfigError("unknown architecture '" + s + "' (expected pointnet or sage)");
}

Conditioning conditioning_from_string(const std::string& s) {
  if (s == "film") return Conditioning::film;
  if (s == "concat") return Conditioning::concat;
  throw ConfigError("unknown conditioning mode '" + s + "' (expected film or concat)");
}

void ModelConfig::validate() const {
  if (width == 0 || layers == 0 || num_params == 0 || num_fields == 0 || conditioner.latent == 0) {
    throw ConfigError("model widths, layer counts and field counts must be positive");
  }
  if (coord_dim != 1 && coord_dim != 2) throw ConfigError("coord_dim must be 1 or 2");
  if (architecture == Architecture::pointnet && layers < 2) throw ConfigError("pointnet needs at least 2 encoder layers");
  for (auto h : conditioner.hidden) {
    if (h == 0) throw ConfigError("conditioner hidden widths must be positive");
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"architecture", to_string(c.architecture)},
       {"conditioning", to_string(c.conditioning)},
       {"width", c.width},
       {"layers", c.layers},
       {"coord_dim", c.coord_dim},
       {"num_params", c.num_params},
       {"num_fields", c.num_fields},
       {"conditioner",
        {{"frequencies", c.conditioner.encoding.frequencies},
         {"base", c.conditioner.encoding.base},
         {"hidden", c.conditioner.hidden},
         {"latent", c.conditioner.latent}}}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.architecture = architecture_from_string(j.at("architecture").get<std::string>());
  c.conditioning = conditioning_from_string(j.at("conditioning").get<std::string>());
  c.width = j.at("width").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.coord_dim = j.at("coord_dim").get<std::size_t>();
  c.num_params = j.at("num_params").get<std::size_t>();
  c.num_fields = j.at("num_fields").get<std::size_t>();
  const auto& k = j.at("conditioner");
  c.conditioner.encoding.frequencies = k.at("frequencies").get<std::size_t>();
  c.conditioner.encoding.base = k.at("base").get<double>();
  c.conditioner.hidden = k.at("hidden").get<std::vector<std::size_t>>();
  c.conditioner.latent = k.at("latent").get<std::size_t>();
}

FilmLayer make_film(ParameterSet& ps, const std::string& name, std::size_t latent, std::size_t width,
                    std::mt19937_64& rng) {
  FilmLayer f{make_linear(ps, name + ".gamma", latent, width, rng), make_linear(ps, name + ".beta", latent, width, rng)};
  // Start near the identity modulation.
  for (auto& x : ps.mutable_at(f.gamma.bias).mutable_data()) x = 1.0;
  for (auto& x : ps.mutable_at(f.beta.bias).mutable_data()) x = 0.0;
  return f;
}

Var film_modulate(Tape& tape, std::span<const Var> p, const FilmLayer& film, Var h, Var z,
                  const tensor::IndexPtr& node_graph) {
  Var gamma = ops::gather_rows(tape, apply(tape, p, film.gamma, z), node_graph);
  Var beta = ops::gather_rows(tape, apply(tape, p, film.beta, z), node_graph);
  return ops::add(tape, ops::mul(tape, gamma, h), beta);
}

SurrogateModel::SurrogateModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const auto& cc = cfg_.conditioner;
  std::vector<std::size_t> widths = {cfg_.num_params * cc.encoding.width_per_input()};
  widths.insert(widths.end(), cc.hidden.begin(), cc.hidden.end());
  widths.push_back(cc.latent);
  conditioner_ = make_mlp(params_, "conditioner", widths, rng);
  cond_end_ = params_.size();

  const std::size_t h = cfg_.width, m = cc.latent;
  const std::size_t in = cfg_.coord_dim * cc.encoding.width_per_input();
  const bool concat = cfg_.conditioning == Conditioning::concat;
  if (cfg_.architecture == Architecture::sage) {
    encoder_ = make_linear(params_, "encoder", in + (concat ? m : 0), h, rng);
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      if (!concat) film_.push_back(make_film(params_, "film." + std::to_string(l), m, h, rng));
      body_.push_back(make_linear(params_, "sage." + std::to_string(l), 2 * h, h, rng));
    }
    decoder_hidden_ = make_linear(params_, "decoder.0", h, h, rng);
  } else {
    encoder_ = make_linear(params_, "encoder", in, h, rng);
    for (std::size_t l = 1; l < cfg_.layers; ++l) {
      if (!concat) film_.push_back(make_film(params_, "film." + std::to_string(l - 1), m, h, rng));
      body_.push_back(make_linear(params_, "point." + std::to_string(l), h, h, rng));
    }
    if (!concat) film_.push_back(make_film(params_, "film." + std::to_string(cfg_.layers - 1), m, h, rng));
    decoder_hidden_ = make_linear(params_, "decoder.0", 2 * h + (concat ? m : 0), h, rng);
  }
  decoder_out_ = make_linear(params_, "decoder.1", h, cfg_.num_fields, rng);
}

Var SurrogateModel::encode_condition(Tape& tape, std::span<const Var> p, const Tensor& cond_features) const {
  const std::size_t expected = cfg_.num_params * cfg_.conditioner.encoding.width_per_input();
  if (cond_features.cols() != expected) {
    throw ShapeError("conditioner expects " + std::to_string(expected) + " encoded inputs, got " +
                     std::to_string(cond_features.cols()));
  }
  return apply(tape, p, conditioner_, tape.constant(cond_features));
}

SurrogateModel::Output SurrogateModel::forward(Tape& tape, std::span<const Var> p, const GraphBatch& batch) const {
  if (p.size() != params_.size()) throw ShapeError("forward() needs one bound variable per parameter tensor");
  if (batch.num_nodes == 0) throw EmptyInputError("forward() on an empty graph");
  Var z = encode_condition(tape, p, batch.cond_features);
  return cfg_.architecture == Architecture::sage ? forward_sage(tape, p, batch, z)
                                                 : forward_pointnet(tape, p, batch, z);
}

SurrogateModel::Output SurrogateModel::forward_sage(Tape& tape, std::span<const Var> p, const GraphBatch& b,
                                                    Var z) const {
  const bool film = cfg_.conditioning == Conditioning::film;
  Var x = tape.constant(b.node_features);
  if (!film) x = ops::concat_cols(tape, {x, ops::gather_rows(tape, z, b.node_graph)});
  Var h = ops::gelu(tape, apply(tape, p, encoder_, x));
  for (std::size_t l = 0; l < body_.size(); ++l) {
    if (film) h = film_modulate(tape, p, film_[l], h, z, b.node_graph);
    Var nb = ops::gather_segment_mean(tape, h, b.edge_src, b.edge_dst, b.num_nodes);
    h = ops::gelu(tape, apply(tape, p, body_[l], ops::concat_cols(tape, {h, nb})));
  }
  Var y = apply(tape, p, decoder_out_, ops::gelu(tape, apply(tape, p, decoder_hidden_, h)));
  return {y, z};
}

SurrogateModel::Output SurrogateModel::forward_pointnet(Tape& tape, std::span<const Var> p, const GraphBatch& b,
                                                        Var z) const {
  const bool film = cfg_.conditioning == Conditioning::film;
  Var h = ops::gelu(tape, apply(tape, p, encoder_, tape.constant(b.node_features)));
  for (std::size_t l = 0; l < body_.size(); ++l) {
    if (film) h = film_modulate(tape, p, film_[l], h, z, b.node_graph);
    h = ops::gelu(tape, apply(tape, p, body_[l], h));
  }
  Var global = ops::segment_max(tape, h, b.node_graph, b.num_graphs);
  Var per_node = ops::gather_rows(tape, global, b.node_graph);
  Var u = film ? ops::concat_cols(tape, {h, per_node})
               : ops::concat_cols(tape, {h, per_node, ops::gather_rows(tape, z, b.node_graph)});
  Var d = ops::gelu(tape, apply(tape, p, decoder_hidden_, u));
  if (film) d = film_modulate(tape, p, film_.back(), d, z, b.node_graph);
  return {apply(tape, p, decoder_out_, d), z};
}

std::vector<char> encode_weights(const ParameterSet& ps) {
  io::ByteWriter w(io::RecordType::checkpoint);
  const auto flat = ps.flatten();
  w.u64(flat.size());
  w.f64s(flat);
  return w.bytes();
}

std::vector<double> decode_weights(std::vector<char> bytes, const std::string& origin) {
  io::ByteReader r(std::move(bytes), io::RecordType::checkpoint, origin);
  const auto at = r.offset();
  const auto n = r.u64();
  if (n > r.remaining() / 8) r.fail_at("weight count " + std::to_string(n) + " exceeds the file size", at);
  auto flat = r.f64s(n);
  r.expect_end();
  return flat;
}

nlohmann::json checkpoint_sidecar(const SurrogateModel& model, const nlohmann::json& extra) {
  auto layout = nlohmann::json::array();
  std::size_t off = 0;
  const auto& ps = model.parameters();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    layout.push_back({{"name", ps.name(i)}, {"shape", ps[i].shape()}, {"offset", off}});
    off += ps[i].numel();
  }
  return {{"format_version", 1},
          {"architecture", to_string(model.config().architecture)},
          {"model", model.config()},
          {"num_values", off},
          {"parameters", layout},
          {"extra", extra}};
}

void save_checkpoint(const std::filesystem::path& stem, const SurrogateModel& model, const nlohmann::json& extra) {
  if (!model.parameters().all_finite()) throw NumericError("refusing to checkpoint non-finite weights");
  auto bin = stem;
  bin += ".bin";
  auto side = stem;
  side += ".json";
  io::write_file_atomic(bin, encode_weights(model.parameters()));
  io::write_text_atomic(side, checkpoint_sidecar(model, extra).dump(2) + "\n");
}

SurrogateModel load_checkpoint(const std::filesystem::path& stem) {
  auto bin = stem;
  bin += ".bin";
  auto side = stem;
  side += ".json";
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(side));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(side.string() + ": " + e.what(), e.byte);
  }
  ModelConfig cfg;
  try {
    cfg = j.at("model").get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(side.string() + ": " + e.what());
  }
  SurrogateModel m(cfg, 0);
  const auto& layout = j.at("parameters");
  if (layout.size() != m.parameters().size()) throw FormatError(side.string() + ": parameter layout mismatch", 0);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout[i].at("name").get<std::string>() != m.parameters().name(i) ||
        layout[i].at("shape").get<tensor::Shape>() != m.parameters()[i].shape()) {
      throw FormatError(side.string() + ": parameter '" + m.parameters().name(i) + "' does not match the layout", 0);
    }
  }
  const auto flat = decode_weights(io::read_file(bin), bin.string());
  if (flat.size() != m.parameters().numel()) {
    throw FormatError(bin.string() + ": holds " + std::to_string(flat.size()) + " values, model needs " +
                          std::to_string(m.parameters().numel()),
                      io::kHeaderBytes);
  }
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (!std::isfinite(flat[i])) throw FormatError(bin.string() + ": non-finite weight", io::kHeaderBytes + 8 + 8 * i);
  }
  m.parameters().assign_flat(flat);
  return m;
}

}  // namespace meshshift::models
