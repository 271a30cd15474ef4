#include "craft/itm.hpp"

#include "craft/decomposition.hpp"
#include "craft/error.hpp"

namespace craft {

namespace {

Vec bias_vec(const ParamTensor& b) { return b.value.row(0).transpose(); }

void require_width(const Mat& z, const ParamTensor& W, const char* op) {
  if (z.cols() != W.value.rows()) throw DimensionError(std::string(op) + ": width mismatch");
}

}  // namespace

ItmParams ItmParams::init(std::int32_t L, std::int32_t P, std::int32_t D, Rng& rng) {
  ItmParams p;
  const std::int32_t n = L + P;
  p.enc_W = ParamTensor("itm.enc_W", xavier_init(n, D, rng));
  p.enc_b = ParamTensor("itm.enc_b", Mat::Zero(1, D));
  p.dec_W = ParamTensor("itm.dec_W", xavier_init(D, n, rng));
  p.dec_b = ParamTensor("itm.dec_b", Mat::Zero(1, n));
  p.comp_W = ParamTensor("itm.comp_W", xavier_init(D, D, rng));
  p.comp_b = ParamTensor("itm.comp_b", Mat::Zero(1, D));
  p.adapt_W = ParamTensor("itm.adapt_W", xavier_init(D, D, rng));
  p.adapt_b = ParamTensor("itm.adapt_b", Mat::Zero(1, D));
  return p;
}

std::vector<ParamTensor*> ItmParams::tensors() {
  return {&enc_W, &enc_b, &dec_W, &dec_b, &comp_W, &comp_b, &adapt_W, &adapt_b};
}

ItmVars bind(ad::Tape& t, ItmParams& p, bool trainable) {
  return {ad::bind(t, p.enc_W, trainable),  ad::bind(t, p.enc_b, trainable),
          ad::bind(t, p.dec_W, trainable),  ad::bind(t, p.dec_b, trainable),
          ad::bind(t, p.comp_W, trainable), ad::bind(t, p.comp_b, trainable),
          ad::bind(t, p.adapt_W, trainable), ad::bind(t, p.adapt_b, trainable)};
}

Mat itm_row_inputs(std::span<const ForecastSample> batch, int kernel, std::span<const double> scale) {
  if (batch.empty()) throw BatchError("itm: empty batch");
  if (!scale.empty() && scale.size() != batch.size()) throw BatchError("itm: one scale per sample");
  const std::int32_t L = batch.front().L, P = batch.front().P;
  const auto N = static_cast<Eigen::Index>(batch.size());
  const int k = fit_kernel(kernel, L + P);
  const BoolMat mask = itm_mask(L, P);
  Mat out(N * P, L + P);
  for (Eigen::Index n = 0; n < N; ++n) {
    const ForecastSample& s = batch[static_cast<std::size_t>(n)];
    if (s.L != L || s.P != P) throw BatchError("itm: mixed window lengths in batch");
    if (s.itm_rows.rows() != P || s.itm_rows.cols() != L + P) throw DimensionError("itm: row shape");
    const double inv = scale.empty() ? 1.0 : 1.0 / scale[static_cast<std::size_t>(n)];
    const Mat observed = s.itm_rows.cwiseProduct(mask.cast<double>());
    out.middleRows(n * P, P) = trend_rows(observed, k) * inv;
  }
  return out;
}

Mat label_trend_inputs(std::span<const ForecastSample> batch, int kernel, std::span<const double> scale) {
  if (batch.empty()) throw BatchError("itm: empty batch");
  const std::int32_t L = batch.front().L;
  const int k = fit_kernel(kernel, L);
  Mat out(static_cast<Eigen::Index>(batch.size()), L);
  for (std::size_t n = 0; n < batch.size(); ++n) {
    if (batch[n].L != L) throw BatchError("itm: mixed window lengths in batch");
    const double inv = scale.empty() ? 1.0 : 1.0 / scale[n];
    out.row(static_cast<Eigen::Index>(n)) = moving_avg_trend(batch[n].y_L, k).transpose() * inv;
  }
  return out;
}

std::pair<Mat, Vec> itm_encode(const ForecastSample& s, const Vec& y_init_T, const ItmParams& p, int kernel) {
  if (y_init_T.size() != s.P) throw DimensionError("itm_encode: initial prediction length");
  const ForecastSample* one = &s;
  const Mat rows = itm_row_inputs(std::span<const ForecastSample>(one, 1), kernel);
  require_width(rows, p.enc_W, "itm_encode");
  Mat zc = mlp_forward(rows, p.enc_W.value, bias_vec(p.enc_b));
  Mat label(1, s.L + s.P);
  label << label_trend_inputs(std::span<const ForecastSample>(one, 1), kernel), y_init_T.transpose();
  Vec zy = mlp_forward(label, p.enc_W.value, bias_vec(p.enc_b)).row(0).transpose();
  return {std::move(zc), std::move(zy)};
}

Mat complete_forward(const Mat& z, const ItmParams& p) {
  require_width(z, p.comp_W, "complete_forward");
  return linear_forward(z, p.comp_W.value, bias_vec(p.comp_b));
}

Vec adapt_forward(const Vec& z, const ItmParams& p) {
  if (z.size() != p.adapt_W.value.rows()) throw DimensionError("adapt_forward: width mismatch");
  return mlp_forward(z.transpose(), p.adapt_W.value, bias_vec(p.adapt_b)).row(0).transpose();
}

Mat itm_decode_cfb(const Mat& zc_completed, const ItmParams& p, std::int32_t P) {
  require_width(zc_completed, p.dec_W, "itm_decode_cfb");
  const Mat full = linear_forward(zc_completed, p.dec_W.value, bias_vec(p.dec_b));
  if (P < 1 || P > full.cols()) throw DimensionError("itm_decode_cfb: P exceeds row length");
  return full.rightCols(P);
}

double loss_be_y(const Mat& c_hat_tp, const Mat& truth) {
  if (c_hat_tp.rows() != truth.rows() || c_hat_tp.cols() != truth.cols() || truth.rows() != truth.cols()) {
    throw DimensionError("loss_be_y: shape mismatch");
  }
  const double P = static_cast<double>(truth.rows());
  return 2.0 * (c_hat_tp - truth).squaredNorm() / (P * P);
}

ad::Var loss_be_y(const ad::Var& c_hat_tp, const Mat& truth, std::int32_t samples) {
  const double P = static_cast<double>(truth.cols());
  const BoolMat all = BoolMat::Constant(truth.rows(), truth.cols(), true);
  return ad::masked_sq_error(c_hat_tp, truth, all, 2.0 / (P * P * samples));
}

ItmTrace itm_forward(const ItmVars& p, const Mat& row_inputs, const Mat& label_trend, const ad::Var& y_init,
                     std::int32_t P) {
  ad::Tape& t = *p.enc_W.tape();
  const ad::Var zc = ad::affine_tanh(t.constant(row_inputs), p.enc_W, p.enc_b);
  const ad::Var zc_done = ad::affine(zc, p.comp_W, p.comp_b);
  ItmTrace out;
  out.c_hat_trend = itm_decode_tail(p, zc_done, P);

  const ad::Var label = ad::hstack(t.constant(label_trend), y_init);
  const ad::Var zy = ad::affine_tanh(label, p.enc_W, p.enc_b);
  out.zy_tilde = ad::affine_tanh(ad::affine(zy, p.comp_W, p.comp_b), p.adapt_W, p.adapt_b);
  return out;
}

ad::Var itm_decode_tail(const ItmVars& p, const ad::Var& z, std::int32_t P) {
  const ad::Var full = ad::affine(z, p.dec_W, p.dec_b);
  return ad::slice_cols(full, full.cols() - P, P);
}

}  // namespace craft
