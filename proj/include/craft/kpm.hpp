#pragma once

// Koopman predictor: a shared P -> D tanh encoder and D -> P linear decoder,
// with a ridge-fitted operator K_C that carries look-back CFB embeddings to
// the observed prediction-window CFB and is then reused on the label.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "craft/autograd.hpp"
#include "craft/world.hpp"

namespace craft {

struct KpmParams {
  ParamTensor enc_W;  // P x D
  ParamTensor enc_b;  // 1 x D
  ParamTensor dec_W;  // D x P
  ParamTensor dec_b;  // 1 x P

  static KpmParams init(std::int32_t P, std::int32_t D, Rng& rng);
  std::vector<ParamTensor*> tensors();
};

struct KpmVars {
  ad::Var enc_W, enc_b, dec_W, dec_b;
};
KpmVars bind(ad::Tape& t, KpmParams& p, bool trainable);

/// ridge_solve(ZC_L, ZC_P, lambda). Throws DomainError unless lambda > 0.
Mat koopman_fit(const Mat& zc_l, const Mat& zc_p, double lambda);
ad::Var koopman_fit(const ad::Var& zc_l, const ad::Var& zc_p, double lambda);

/// X * koopman_fit(A, B, lambda) without forming the D x D operator when A
/// has fewer rows than columns.
ad::Var koopman_apply(const ad::Var& x, const ad::Var& a, const ad::Var& b, double lambda);

/// (2 / P^2) * sum over the observed triangle of (c_hat - c_P.values)^2.
double loss_be_k(const Mat& c_hat, const CfbMatrix& c_p);

/// Stacked inputs for a batch of N samples. Row block k*P..k*P+P-1 belongs
/// to sample k.
struct KpmInputs {
  std::int32_t P = 0;
  Mat cl_trend;        // (N*P) x P: trend of the look-back CFB rows
  Mat cp_observed;     // (N*P) x P: observed prediction-window CFB, zero elsewhere
  BoolMat cp_mask;     // (N*P) x P
  Mat y_trend_tail;    // N x P: last P values of the look-back label trend
  // Sample ranges [first, first + count) that share one K_C.
  std::vector<std::pair<std::int32_t, std::int32_t>> chunks;

  std::int32_t samples() const { return static_cast<std::int32_t>(y_trend_tail.rows()); }
};

/// Builds the inputs with every sample divided by its scale (1 when empty).
KpmInputs kpm_inputs(std::span<const ForecastSample> batch, int kernel, std::span<const double> scale = {});

struct KpmTrace {
  ad::Var c_hat;   // (N*P) x P decoded recovery of c_P
  ad::Var y_init;  // N x P initial label trend prediction
  ad::Var loss_be_k;
};

KpmTrace kpm_forward(const KpmVars& p, const KpmInputs& in, double lambda);

struct KpmOutput {
  Mat K_C;
  Mat c_hat_P;
  Vec y_init_T;
  double loss_be_k = 0.0;
};

/// One K_C fitted over the whole batch. Throws BatchError on mixed window
/// lengths or an empty batch.
std::vector<KpmOutput> kpm_forward(std::span<const ForecastSample> batch, KpmParams& params, double lambda,
                                   int kernel);

}  // namespace craft
