#include "craft/kpm.hpp"

#include <cmath>

#include "craft/decomposition.hpp"
#include "craft/error.hpp"

namespace craft {

KpmParams KpmParams::init(std::int32_t P, std::int32_t D, Rng& rng) {
  KpmParams p;
  p.enc_W = ParamTensor("kpm.enc_W", xavier_init(P, D, rng));
  p.enc_b = ParamTensor("kpm.enc_b", Mat::Zero(1, D));
  p.dec_W = ParamTensor("kpm.dec_W", xavier_init(D, P, rng));
  p.dec_b = ParamTensor("kpm.dec_b", Mat::Zero(1, P));
  return p;
}

std::vector<ParamTensor*> KpmParams::tensors() { return {&enc_W, &enc_b, &dec_W, &dec_b}; }

KpmVars bind(ad::Tape& t, KpmParams& p, bool trainable) {
  return {ad::bind(t, p.enc_W, trainable), ad::bind(t, p.enc_b, trainable), ad::bind(t, p.dec_W, trainable),
          ad::bind(t, p.dec_b, trainable)};
}

Mat koopman_fit(const Mat& zc_l, const Mat& zc_p, double lambda) {
  if (!(lambda > 0.0)) throw DomainError("koopman_fit: lambda must be positive");
  return ridge_solve(zc_l, zc_p, lambda);
}

ad::Var koopman_fit(const ad::Var& zc_l, const ad::Var& zc_p, double lambda) {
  if (!(lambda > 0.0)) throw DomainError("koopman_fit: lambda must be positive");
  return ad::ridge(zc_l, zc_p, lambda);
}

ad::Var koopman_apply(const ad::Var& x, const ad::Var& a, const ad::Var& b, double lambda) {
  if (!(lambda > 0.0)) throw DomainError("koopman_fit: lambda must be positive");
  if (a.rows() != b.rows()) throw DimensionError("koopman_fit: row counts differ");
  if (a.rows() < a.cols()) {
    // X A^T (A A^T + lambda I)^{-1} B
    const ad::Var at = ad::transpose(a);
    const ad::Var gram = ad::add_diagonal(ad::matmul(a, at), lambda);
    return ad::matmul(ad::matmul(x, at), ad::solve_spd(gram, b));
  }
  return ad::matmul(x, ad::ridge(a, b, lambda));
}

double loss_be_k(const Mat& c_hat, const CfbMatrix& c_p) {
  const Eigen::Index P = c_p.values.rows();
  if (c_hat.rows() != P || c_hat.cols() != P || c_p.values.cols() != P) {
    throw DimensionError("loss_be_k: shape mismatch");
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < P; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double d = c_hat(i, j) - c_p.values(i, j);
      sum += d * d;
    }
  }
  return 2.0 * sum / static_cast<double>(P * P);
}

KpmInputs kpm_inputs(std::span<const ForecastSample> batch, int kernel, std::span<const double> scale) {
  if (batch.empty()) throw BatchError("kpm: empty batch");
  if (!scale.empty() && scale.size() != batch.size()) throw BatchError("kpm: one scale per sample");
  const std::int32_t L = batch.front().L, P = batch.front().P;
  const auto N = static_cast<Eigen::Index>(batch.size());
  const int k_row = fit_kernel(kernel, P);
  const int k_label = fit_kernel(kernel, L);
  KpmInputs in;
  in.P = P;
  in.cl_trend.resize(N * P, P);
  in.cp_observed.resize(N * P, P);
  in.cp_mask.resize(N * P, P);
  in.y_trend_tail.resize(N, P);
  for (Eigen::Index k = 0; k < N; ++k) {
    const ForecastSample& s = batch[static_cast<std::size_t>(k)];
    if (s.L != L || s.P != P) throw BatchError("kpm: mixed window lengths in batch");
    if (!s.c_Lmat.truth) throw DataError("kpm: look-back CFB matrix has no values");
    const double inv = scale.empty() ? 1.0 : 1.0 / scale[static_cast<std::size_t>(k)];
    in.cl_trend.middleRows(k * P, P) = trend_rows(*s.c_Lmat.truth, k_row) * inv;
    in.cp_observed.middleRows(k * P, P) = s.c_P.values.cwiseProduct(s.c_P.mask.cast<double>()) * inv;
    in.cp_mask.middleRows(k * P, P) = s.c_P.mask;
    const Vec trend = moving_avg_trend(s.y_L, k_label);
    in.y_trend_tail.row(k) = trend.tail(P).transpose() * inv;
  }
  in.chunks = {{0, static_cast<std::int32_t>(N)}};
  return in;
}

KpmTrace kpm_forward(const KpmVars& p, const KpmInputs& in, double lambda) {
  ad::Tape& t = *p.enc_W.tape();
  const std::int32_t P = in.P;
  const std::int32_t N = in.samples();
  const ad::Var zc_l = ad::affine_tanh(t.constant(in.cl_trend), p.enc_W, p.enc_b);
  const ad::Var zc_p = ad::affine_tanh(t.constant(in.cp_observed), p.enc_W, p.enc_b);
  const ad::Var zy = ad::affine_tanh(t.constant(in.y_trend_tail), p.enc_W, p.enc_b);

  std::vector<ad::Var> zc_hat, zy_hat;
  std::int32_t covered = 0;
  for (const auto& [first, count] : in.chunks) {
    if (first != covered || count < 1) throw BatchError("kpm: chunks must tile the batch in order");
    covered += count;
    const ad::Var a = ad::slice_rows(zc_l, first * P, count * P);
    const ad::Var b = ad::slice_rows(zc_p, first * P, count * P);
    const std::array<ad::Var, 2> parts{a, ad::slice_rows(zy, first, count)};
    const ad::Var moved = koopman_apply(ad::vstack(parts), a, b, lambda);
    zc_hat.push_back(ad::slice_rows(moved, 0, count * P));
    zy_hat.push_back(ad::slice_rows(moved, count * P, count));
  }
  if (covered != N) throw BatchError("kpm: chunks must tile the batch in order");

  KpmTrace out;
  out.c_hat = ad::affine(ad::vstack(zc_hat), p.dec_W, p.dec_b);
  out.y_init = ad::affine(ad::vstack(zy_hat), p.dec_W, p.dec_b);
  out.loss_be_k = ad::masked_sq_error(out.c_hat, in.cp_observed, in.cp_mask,
                                      2.0 / (static_cast<double>(P) * P * N));
  return out;
}

std::vector<KpmOutput> kpm_forward(std::span<const ForecastSample> batch, KpmParams& params, double lambda,
                                   int kernel) {
  const KpmInputs in = kpm_inputs(batch, kernel);
  ad::Tape t;
  const KpmVars v = bind(t, params, false);
  const KpmTrace tr = kpm_forward(v, in, lambda);
  const Mat zc_l = mlp_forward(in.cl_trend, params.enc_W.value, params.enc_b.value.row(0).transpose());
  const Mat zc_p = mlp_forward(in.cp_observed, params.enc_W.value, params.enc_b.value.row(0).transpose());
  const Mat K = koopman_fit(zc_l, zc_p, lambda);
  const std::int32_t P = in.P;
  std::vector<KpmOutput> out(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    out[k].K_C = K;
    out[k].c_hat_P = tr.c_hat.value().middleRows(row * P, P);
    out[k].y_init_T = tr.y_init.value().row(row).transpose();
    out[k].loss_be_k = loss_be_k(out[k].c_hat_P, batch[k].c_P);
  }
  return out;
}

}  // namespace craft
