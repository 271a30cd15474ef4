#include "craft/etg.hpp"

#include <cmath>

#include "craft/error.hpp"

namespace craft {

EtgParams EtgParams::init(std::int32_t D, Rng& rng) {
  EtgParams p;
  p.Wq = ParamTensor("etg.Wq", xavier_init(D, D, rng));
  p.Wk = ParamTensor("etg.Wk", xavier_init(D, D, rng));
  p.Wv = ParamTensor("etg.Wv", xavier_init(D, D, rng));
  return p;
}

std::vector<ParamTensor*> EtgParams::tensors() { return {&Wq, &Wk, &Wv}; }

EtgVars bind(ad::Tape& t, EtgParams& p, bool trainable) {
  return {ad::bind(t, p.Wq, trainable), ad::bind(t, p.Wk, trainable), ad::bind(t, p.Wv, trainable)};
}

Mat reconciliation_matrix(const Mat& z_group, const EtgParams& p) {
  const Eigen::Index D = p.Wq.value.rows();
  if (z_group.cols() != D || z_group.rows() < 1) throw DimensionError("reconciliation_matrix: shape mismatch");
  const Mat scores = (z_group * p.Wq.value) * (z_group * p.Wk.value).transpose() / std::sqrt(double(D));
  const std::vector<bool> active(static_cast<std::size_t>(scores.cols()), true);
  Mat B(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    B.row(i) = softmax_masked(scores.row(i).transpose(), active).transpose();
  }
  return B;
}

Mat calibrate(const Mat& z_group, const Mat& B, const EtgParams& p, const std::vector<bool>& parent_flags) {
  const Eigen::Index n = z_group.rows();
  if (B.rows() != n || B.cols() != n || static_cast<Eigen::Index>(parent_flags.size()) != n ||
      z_group.cols() != p.Wv.value.rows()) {
    throw DimensionError("calibrate: shape mismatch");
  }
  Mat out = B * (z_group * p.Wv.value);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (parent_flags[static_cast<std::size_t>(i)]) out.row(i) = z_group.row(i);
  }
  return out;
}

namespace {

void check_layout(Eigen::Index rows, const GroupLayout& layout) {
  if (layout.groups < 1 || layout.children < 1 || rows != layout.nodes()) {
    throw BatchError("group layout does not match the batch");
  }
}

// Row g: +1 on the parent of group g, -1 on each of its children.
Mat gap_operator(const GroupLayout& layout) {
  Mat S = Mat::Zero(layout.groups, layout.nodes());
  for (std::int32_t g = 0; g < layout.groups; ++g) {
    for (std::int32_t c = 0; c < layout.children; ++c) S(g, g * layout.group_size() + c) = -1.0;
    S(g, layout.parent_row(g)) = 1.0;
  }
  return S;
}

}  // namespace

double loss_recon(const Mat& y, const GroupLayout& layout) {
  check_layout(y.rows(), layout);
  const double g = layout.groups;
  return (gap_operator(layout) * y).squaredNorm() / (g * g);
}

ad::Var loss_recon(const ad::Var& y, const GroupLayout& layout) {
  check_layout(y.rows(), layout);
  const double g = layout.groups;
  const ad::Var gap = ad::matmul(y.tape()->constant(gap_operator(layout)), y);
  return ad::scale(ad::sum_squares(gap), 1.0 / (g * g));
}

ad::Var etg_forward(const EtgVars& p, const ad::Var& z, const GroupLayout& layout) {
  check_layout(z.rows(), layout);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(z.cols()));
  const ad::Var q = ad::matmul(z, p.Wq);
  const ad::Var k = ad::matmul(z, p.Wk);
  const ad::Var v = ad::matmul(z, p.Wv);
  const std::int32_t n = layout.group_size();
  std::vector<ad::Var> rows;
  rows.reserve(static_cast<std::size_t>(layout.groups) * 2);
  for (std::int32_t g = 0; g < layout.groups; ++g) {
    const Eigen::Index at = static_cast<Eigen::Index>(g) * n;
    const ad::Var qg = ad::slice_rows(q, at, layout.children);
    const ad::Var kg = ad::slice_rows(k, at, n);
    const ad::Var vg = ad::slice_rows(v, at, n);
    // Only child rows of B are needed; the parent row is passed through.
    const ad::Var B = ad::softmax_rows(ad::scale(ad::matmul(qg, ad::transpose(kg)), inv_sqrt_d));
    rows.push_back(ad::matmul(B, vg));
    rows.push_back(ad::slice_rows(z, layout.parent_row(g), 1));
  }
  return ad::vstack(rows);
}

}  // namespace craft
