#pragma once

// Internal trend mining over full look-back + prediction rows.

#include <cstdint>
#include <span>
#include <utility>

#include "craft/autograd.hpp"
#include "craft/world.hpp"

namespace craft {

struct ItmParams {
  ParamTensor enc_W;    // (L+P) x D
  ParamTensor enc_b;    // 1 x D
  ParamTensor dec_W;    // D x (L+P)
  ParamTensor dec_b;    // 1 x (L+P)
  ParamTensor comp_W;   // D x D
  ParamTensor comp_b;   // 1 x D
  ParamTensor adapt_W;  // D x D
  ParamTensor adapt_b;  // 1 x D

  static ItmParams init(std::int32_t L, std::int32_t P, std::int32_t D, Rng& rng);
  std::vector<ParamTensor*> tensors();
};

struct ItmVars {
  ad::Var enc_W, enc_b, dec_W, dec_b, comp_W, comp_b, adapt_W, adapt_b;
};
ItmVars bind(ad::Tape& t, ItmParams& p, bool trainable);

/// zc_rows[i] = encoder(trend of itm_rows[i] with unobserved columns zeroed);
/// zy = encoder(trend(y_L) followed by y_init).
std::pair<Mat, Vec> itm_encode(const ForecastSample& s, const Vec& y_init_T, const ItmParams& p, int kernel);

Mat complete_forward(const Mat& z, const ItmParams& p);
Vec adapt_forward(const Vec& z, const ItmParams& p);

/// Decodes each completed row to length L+P and keeps the last P columns.
Mat itm_decode_cfb(const Mat& zc_completed, const ItmParams& p, std::int32_t P);

/// (2 / P^2) * sum over the full P x P grid.
double loss_be_y(const Mat& c_hat_tp, const Mat& truth);
ad::Var loss_be_y(const ad::Var& c_hat_tp, const Mat& truth, std::int32_t samples);

/// (N*P) x (L+P) trend of the zero-filled full rows, divided by scale.
Mat itm_row_inputs(std::span<const ForecastSample> batch, int kernel, std::span<const double> scale = {});

/// N x L trend of the look-back label, divided by scale.
Mat label_trend_inputs(std::span<const ForecastSample> batch, int kernel, std::span<const double> scale = {});

struct ItmTrace {
  ad::Var c_hat_trend;  // (N*P) x P
  ad::Var zy_tilde;     // N x D, after completion and adaptation
};

ItmTrace itm_forward(const ItmVars& p, const Mat& row_inputs, const Mat& label_trend, const ad::Var& y_init,
                     std::int32_t P);

/// Last P columns of decoder(z).
ad::Var itm_decode_tail(const ItmVars& p, const ad::Var& z, std::int32_t P);

}  // namespace craft
