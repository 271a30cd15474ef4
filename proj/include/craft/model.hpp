#pragma once

// Full CRAFT model: KPM -> ITM -> ETG -> decoders, plus residual linear heads.

#include <cstdint>
#include <span>
#include <vector>

#include "craft/config.hpp"
#include "craft/etg.hpp"
#include "craft/itm.hpp"
#include "craft/kpm.hpp"
#include "craft/losses.hpp"

namespace craft {

struct CraftParams {
  std::int32_t L = 0;
  std::int32_t P = 0;
  std::int32_t D = 0;
  // Data-derived normalizer; inputs of a child are divided by value_scale and
  // those of a parent with m children by m * value_scale. Not trained.
  double value_scale = 1.0;

  KpmParams kpm;
  ItmParams itm;
  EtgParams etg;
  ParamTensor res_y_W;  // L x P
  ParamTensor res_y_b;  // 1 x P
  ParamTensor res_c_W;  // P x P
  ParamTensor res_c_b;  // 1 x P

  static CraftParams init(std::int32_t L, std::int32_t P, std::int32_t D, std::uint64_t seed);
  std::vector<ParamTensor*> tensors();
  std::size_t parameter_count();
};

struct ForwardOptions {
  double lambda = 0.1;
  int kernel = 15;
  KoopmanScope scope = KoopmanScope::sample;
  Variant variant = Variant::full;
  LossWeights weights;

  static ForwardOptions from(const TrainConfig& c);
  // Loss weights after the variant's pass-throughs are applied.
  LossWeights effective_weights() const;
};

/// Groups flattened as m children followed by their parent.
struct NodeBatch {
  std::vector<ForecastSample> nodes;
  GroupLayout layout;
};

/// Throws BatchError when groups differ in size or window.
NodeBatch make_batch(std::span<const HierGroup> groups);

struct LossParts {
  double l_y = 0.0;
  double l_be_k = 0.0;
  double l_be_y = 0.0;
  double l_recon = 0.0;
  double total = 0.0;
};

/// Tape-level forward pass; every output is in normalized units.
struct CraftTrace {
  ad::Var y_hat;      // N x P
  ad::Var y_trend;    // N x P
  ad::Var y_res;      // N x P
  ad::Var c_hat;      // (N*P) x P; empty for the KPM-only variant
  ad::Var c_trend;
  ad::Var c_res;
  ad::Var l_y, l_be_k, l_be_y, l_recon, total;
  Vec scale;          // per-node normalizer

  LossParts parts() const;
};

CraftTrace craft_forward(ad::Tape& t, CraftParams& params, const NodeBatch& batch, const ForwardOptions& opt,
                         bool trainable);

struct NodeForecast {
  Vec y_hat;
  Mat c_hat;  // empty for the KPM-only variant
};

struct CraftResult {
  std::vector<NodeForecast> nodes;  // batch order, original units
  LossParts loss;
};

CraftResult craft_forward(CraftParams& params, const NodeBatch& batch, const ForwardOptions& opt);
CraftResult craft_forward(CraftParams& params, const HierGroup& group, const ForwardOptions& opt);

}  // namespace craft
