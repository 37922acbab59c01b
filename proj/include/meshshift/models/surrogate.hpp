#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "meshshift/models/graph.hpp"
#include "meshshift/models/parameters.hpp"

namespace meshshift::models {

enum class Architecture { pointnet, sage };
enum class Conditioning { concat, film };

std::string to_string(Architecture a);
std::string to_string(Conditioning c);
Architecture architecture_from_string(const std::string& s);
Conditioning conditioning_from_string(const std::string& s);

struct ConditionerConfig {
  SinusoidalConfig encoding;
  std::vector<std::size_t> hidden = {32};
  std::size_t latent = 8;
  bool operator==(const ConditionerConfig&) const = default;
};

struct ModelConfig {
  Architecture architecture = Architecture::sage;
  Conditioning conditioning = Conditioning::film;
  std::size_t width = 64;
  /// Message-passing layers for sage, per-node encoder layers for pointnet.
  std::size_t layers = 4;
  std::size_t coord_dim = 2;
  std::size_t num_params = 4;
  std::size_t num_fields = 3;
  ConditionerConfig conditioner;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Feature-wise affine modulation gamma(z) * h + beta(z) with gamma, beta affine in z.
struct FilmLayer {
  Linear gamma;
  Linear beta;
};

FilmLayer make_film(ParameterSet& ps, const std::string& name, std::size_t latent, std::size_t width,
                    std::mt19937_64& rng);

/// Modulates node features h (N x H) with per-graph latents z (B x m); node_graph maps nodes to rows of z.
Var film_modulate(Tape& tape, std::span<const Var> p, const FilmLayer& film, Var h, Var z,
                  const tensor::IndexPtr& node_graph);

/// Conditioner phi followed by a PointNet- or GraphSAGE-style body g.
class SurrogateModel {
 public:
  struct Output {
    Var prediction;  // N x F, normalized field units
    Var z;           // B x latent
  };

  SurrogateModel(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return cfg_; }
  ParameterSet& parameters() noexcept { return params_; }
  const ParameterSet& parameters() const noexcept { return params_; }

  /// z = MLP(sinusoidal(params)), one row per graph.
  Var encode_condition(Tape& tape, std::span<const Var> p, const Tensor& cond_features) const;
  Output forward(Tape& tape, std::span<const Var> p, const GraphBatch& batch) const;

  /// Index ranges of the conditioner's tensors within parameters().
  std::size_t conditioner_begin() const noexcept { return 0; }
  std::size_t conditioner_end() const noexcept { return cond_end_; }
  const std::vector<FilmLayer>& film_layers() const noexcept { return film_; }

 private:
  Output forward_pointnet(Tape& tape, std::span<const Var> p, const GraphBatch& b, Var z) const;
  Output forward_sage(Tape& tape, std::span<const Var> p, const GraphBatch& b, Var z) const;

  ModelConfig cfg_;
  ParameterSet params_;
  Mlp conditioner_;
  std::size_t cond_end_ = 0;
  Linear encoder_;
  std::vector<Linear> body_;
  std::vector<FilmLayer> film_;
  Linear decoder_hidden_;
  Linear decoder_out_;
};

/// Writes <stem>.bin (flat little-endian weights) and <stem>.json (architecture,
/// config and parameter layout). `extra` is echoed into the sidecar.
void save_checkpoint(const std::filesystem::path& stem, const SurrogateModel& model,
                     const nlohmann::json& extra = nlohmann::json::object());
SurrogateModel load_checkpoint(const std::filesystem::path& stem);
std::vector<char> encode_weights(const ParameterSet& ps);
std::vector<double> decode_weights(std::vector<char> bytes, const std::string& origin);
nlohmann::json checkpoint_sidecar(const SurrogateModel& model, const nlohmann::json& extra);

}  // namespace meshshift::models
