#pragma once

#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "meshshift/models/parameters.hpp"

namespace meshshift::uda {

using models::ParameterSet;
using tensor::Tape;
using tensor::Var;

enum class Kind { none, coral, cmd, dann };

std::string to_string(Kind k);
Kind kind_from_string(const std::string& s);

struct UdaConfig {
  Kind kind = Kind::none;
  double lambda = 0.0;
  std::size_t cmd_order = 5;
  double cmd_lo = -1.0;
  double cmd_hi = 1.0;
  std::vector<std::size_t> dann_hidden = {16};

  void validate() const;
  bool operator==(const UdaConfig&) const = default;
};

void to_json(nlohmann::json& j, const UdaConfig& c);
void from_json(const nlohmann::json& j, UdaConfig& c);

/// ||C_s - C_t||_F^2 / (4 m^2) with sample covariances normalized by 1 / (B - 1).
Var coral_distance(Tape& tape, Var hs, Var ht);

/// Central moment discrepancy up to order K for features bounded in [a, b].
Var cmd_distance(Tape& tape, Var hs, Var ht, std::size_t order, double a, double b);

/// Identity forward; the backward pass multiplies the upstream gradient by -strength.
Var grad_reverse(Tape& tape, Var h, double strength);

/// log(1 + exp(x)) composed from stable primitives.
Var softplus(Tape& tape, Var x);

/// Domain classifier: MLP over latent rows ending in one logit.
struct Discriminator {
  models::Mlp mlp;
  std::size_t begin = 0, end = 0;  // tensor index range inside its ParameterSet
};

Discriminator make_discriminator(ParameterSet& ps, std::size_t latent, const std::vector<std::size_t>& hidden,
                                 std::mt19937_64& rng);

/// Mean binary cross-entropy of source (label 0) and target (label 1) rows, computed
/// on grad_reverse(h, strength).
Var dann_domain_loss(Tape& tape, std::span<const Var> p, const Discriminator& disc, Var hs, Var ht,
                     double strength);

/// recon + lambda * distance.
Var combined_objective(Tape& tape, Var recon, Var distance, double lambda);

/// The divergence used during training: CORAL on z, CMD on tanh(z), or the DANN
/// loss with unit reversal strength (so lambda scales both the discriminator and
/// the reversed feature gradient). Kind none is rejected.
Var domain_distance(Tape& tape, const UdaConfig& cfg, std::span<const Var> disc_params, const Discriminator* disc,
                    Var zs, Var zt);

}  // namespace meshshift::uda
