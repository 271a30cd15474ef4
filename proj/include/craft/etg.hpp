#pragma once

// External trend guide: attention-style reconciliation inside each sampled
// hierarchy group. Groups are laid out as m children followed by their
// virtual parent.

#include <cstdint>
#include <vector>

#include "craft/autograd.hpp"

namespace craft {

struct EtgParams {
  ParamTensor Wq;  // D x D
  ParamTensor Wk;
  ParamTensor Wv;

  static EtgParams init(std::int32_t D, Rng& rng);
  std::vector<ParamTensor*> tensors();
};

struct EtgVars {
  ad::Var Wq, Wk, Wv;
};
EtgVars bind(ad::Tape& t, EtgParams& p, bool trainable);

/// g groups of m children + 1 parent, parent last within each group.
struct GroupLayout {
  std::int32_t groups = 0;
  std::int32_t children = 0;

  std::int32_t group_size() const { return children + 1; }
  std::int32_t nodes() const { return groups * group_size(); }
  std::int32_t parent_row(std::int32_t group) const { return group * group_size() + children; }
  bool is_parent(std::int32_t row) const { return row % group_size() == children; }
};

/// Row-softmax of (z Wq)(z Wk)^T / sqrt(D) over every node of the group.
Mat reconciliation_matrix(const Mat& z_group, const EtgParams& p);

/// Children receive sum_k B[i,k] (z_k Wv); rows flagged as parents are
/// copied through unchanged.
Mat calibrate(const Mat& z_group, const Mat& B, const EtgParams& p, const std::vector<bool>& parent_flags);

/// (1/g^2) sum over groups of ||parent - sum(children)||^2; rows of `y` are
/// nodes in layout order. Throws BatchError on a malformed layout.
double loss_recon(const Mat& y, const GroupLayout& layout);
ad::Var loss_recon(const ad::Var& y, const GroupLayout& layout);

/// Per-group reconciliation and calibration of an (layout.nodes() x D) batch.
ad::Var etg_forward(const EtgVars& p, const ad::Var& z, const GroupLayout& layout);

}  // namespace craft
