#pragma once

// Independent reference implementations used to check the library. Nothing
// here calls into craft's numeric code paths; everything is plain loops.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "craft/model.hpp"
#include "craft/world.hpp"

namespace oracle {

using craft::Mat;
using craft::Vec;

// Gaussian elimination with partial pivoting; solves M X = R.
inline Mat gauss_solve(Mat M, Mat R) {
  const Eigen::Index n = M.rows();
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index piv = c;
    for (Eigen::Index r = c + 1; r < n; ++r) {
      if (std::abs(M(r, c)) > std::abs(M(piv, c))) piv = r;
    }
    if (M(piv, c) == 0.0) throw std::runtime_error("gauss_solve: singular");
    if (piv != c) {
      M.row(c).swap(M.row(piv));
      R.row(c).swap(R.row(piv));
    }
    for (Eigen::Index r = c + 1; r < n; ++r) {
      const double f = M(r, c) / M(c, c);
      for (Eigen::Index k = c; k < n; ++k) M(r, k) -= f * M(c, k);
      for (Eigen::Index k = 0; k < R.cols(); ++k) R(r, k) -= f * R(c, k);
    }
  }
  Mat X(n, R.cols());
  for (Eigen::Index r = n - 1; r >= 0; --r) {
    for (Eigen::Index k = 0; k < R.cols(); ++k) {
      double acc = R(r, k);
      for (Eigen::Index c = r + 1; c < n; ++c) acc -= M(r, c) * X(c, k);
      X(r, k) = acc / M(r, r);
    }
  }
  return X;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat out = Mat::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index k = 0; k < a.cols(); ++k)
      for (Eigen::Index j = 0; j < b.cols(); ++j) out(i, j) += a(i, k) * b(k, j);
  return out;
}

inline Mat transpose(const Mat& a) {
  Mat out(a.cols(), a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

// Normal equations (A^T A + lambda I) K = A^T B, solved by elimination.
inline Mat ridge(const Mat& A, const Mat& B, double lambda) {
  const Mat At = transpose(A);
  Mat M = matmul(At, A);
  for (Eigen::Index i = 0; i < M.rows(); ++i) M(i, i) += lambda;
  return gauss_solve(M, matmul(At, B));
}

inline Mat affine(const Mat& x, const Mat& W, const Mat& b) {
  Mat out = matmul(x, W);
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) += b(0, j);
  return out;
}

inline Mat tanh(Mat a) {
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = std::tanh(a.data()[i]);
  return a;
}

inline int fit_kernel(int k, Eigen::Index n) {
  int cap = static_cast<int>(2 * n - 1);
  if (k > cap) k = cap;
  if (k % 2 == 0) --k;
  return k;
}

// Replicate-padded centered moving average.
inline std::vector<double> moving_avg(const std::vector<double>& x, int k) {
  const int n = static_cast<int>(x.size());
  const int h = (k - 1) / 2;
  std::vector<double> out(x.size());
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int d = -h; d <= h; ++d) {
      int j = i + d;
      if (j < 0) j = 0;
      if (j > n - 1) j = n - 1;
      s += x[static_cast<std::size_t>(j)];
    }
    out[static_cast<std::size_t>(i)] = s / k;
  }
  return out;
}

inline Mat row_trend(const Mat& m, int k) {
  Mat out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    const std::vector<double> t = moving_avg(row, k);
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(i, j) = t[static_cast<std::size_t>(j)];
  }
  return out;
}

inline Mat as_row(const Vec& v) {
  Mat out(1, v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out(0, i) = v[i];
  return out;
}

inline std::vector<double> softmax(const std::vector<double>& s) {
  double mx = s[0];
  for (double v : s) mx = std::max(mx, v);
  std::vector<double> e(s.size());
  double tot = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) tot += (e[i] = std::exp(s[i] - mx));
  for (double& v : e) v /= tot;
  return e;
}

struct PipelineOut {
  std::vector<Vec> y_hat;  // original units, one per node
  double l_y = 0, l_be_k = 0, l_be_y = 0, l_recon = 0, total = 0;
};

// Reference forward pass of the full model over one node batch.
inline PipelineOut pipeline(craft::CraftParams& p, const craft::NodeBatch& b, const craft::ForwardOptions& opt) {
  using craft::Variant;
  const int L = p.L, P = p.P, D = p.D;
  const int m = b.layout.children, gs = m + 1, G = b.layout.groups;
  const int N = G * gs;
  const int kr = fit_kernel(opt.kernel, P), kl = fit_kernel(opt.kernel, L), ki = fit_kernel(opt.kernel, L + P);

  std::vector<double> s(static_cast<std::size_t>(N));
  for (int n = 0; n < N; ++n) s[static_cast<std::size_t>(n)] = p.value_scale * (n % gs == m ? m : 1);

  auto V = [](const craft::ParamTensor& t) { return t.value; };
  std::vector<Mat> zcl(N), zcp(N), cpo(N), clt(N);
  std::vector<Mat> zy(N), ytrend(N);
  for (int n = 0; n < N; ++n) {
    const craft::ForecastSample& x = b.nodes[static_cast<std::size_t>(n)];
    const double sc = s[static_cast<std::size_t>(n)];
    clt[n] = row_trend(*x.c_Lmat.truth, kr) / sc;
    cpo[n] = Mat::Zero(P, P);
    for (int i = 0; i < P; ++i)
      for (int j = 0; j <= i; ++j) cpo[n](i, j) = (*x.c_P.truth)(i, j) / sc;
    zcl[n] = tanh(affine(clt[n], V(p.kpm.enc_W), V(p.kpm.enc_b)));
    zcp[n] = tanh(affine(cpo[n], V(p.kpm.enc_W), V(p.kpm.enc_b)));
    std::vector<double> yl(x.y_L.data(), x.y_L.data() + L);
    const std::vector<double> tr = moving_avg(yl, kl);
    ytrend[n].resize(1, L);
    for (int j = 0; j < L; ++j) ytrend[n](0, j) = tr[static_cast<std::size_t>(j)] / sc;
    zy[n] = tanh(affine(ytrend[n].rightCols(P), V(p.kpm.enc_W), V(p.kpm.enc_b)));
  }

  std::vector<std::pair<int, int>> chunks;
  if (opt.scope == craft::KoopmanScope::sample)
    for (int n = 0; n < N; ++n) chunks.emplace_back(n, 1);
  else if (opt.scope == craft::KoopmanScope::group)
    for (int g = 0; g < G; ++g) chunks.emplace_back(g * gs, gs);
  else
    chunks.emplace_back(0, N);

  PipelineOut out;
  std::vector<Mat> y_init(N), c_hat_k(N);
  for (auto [first, count] : chunks) {
    Mat A(count * P, D), B(count * P, D);
    for (int k = 0; k < count; ++k) {
      A.middleRows(k * P, P) = zcl[first + k];
      B.middleRows(k * P, P) = zcp[first + k];
    }
    const Mat K = ridge(A, B, opt.lambda);
    for (int k = 0; k < count; ++k) {
      const int n = first + k;
      c_hat_k[n] = affine(matmul(zcl[n], K), V(p.kpm.dec_W), V(p.kpm.dec_b));
      y_init[n] = affine(matmul(zy[n], K), V(p.kpm.dec_W), V(p.kpm.dec_b));
    }
  }
  for (int n = 0; n < N; ++n)
    for (int i = 0; i < P; ++i)
      for (int j = 0; j <= i; ++j) out.l_be_k += std::pow(c_hat_k[n](i, j) - cpo[n](i, j), 2);
  out.l_be_k *= 2.0 / (double(P) * P * N);

  std::vector<Mat> y_trend(N), c_hat(N);
  if (opt.variant == Variant::kpm_only) {
    y_trend = y_init;
  } else {
    std::vector<Mat> zt(N);
    for (int n = 0; n < N; ++n) {
      const craft::ForecastSample& x = b.nodes[static_cast<std::size_t>(n)];
      const double sc = s[static_cast<std::size_t>(n)];
      Mat rows = x.itm_rows;
      for (int i = 0; i < P; ++i)
        for (int j = L + i + 1; j < L + P; ++j) rows(i, j) = 0.0;
      const Mat zc = tanh(affine(row_trend(rows, ki) / sc, V(p.itm.enc_W), V(p.itm.enc_b)));
      const Mat full = affine(affine(zc, V(p.itm.comp_W), V(p.itm.comp_b)), V(p.itm.dec_W), V(p.itm.dec_b));
      const Mat c_res = affine((*x.c_Lmat.truth) / sc - clt[n], V(p.res_c_W), V(p.res_c_b));
      c_hat[n] = full.rightCols(P) + c_res;
      for (int i = 0; i < P; ++i)
        for (int j = 0; j < P; ++j) out.l_be_y += std::pow(c_hat[n](i, j) - (*x.c_P.truth)(i, j) / sc, 2);

      Mat label(1, L + P);
      label << ytrend[n], y_init[n];
      const Mat z = tanh(affine(label, V(p.itm.enc_W), V(p.itm.enc_b)));
      zt[n] = tanh(affine(affine(z, V(p.itm.comp_W), V(p.itm.comp_b)), V(p.itm.adapt_W), V(p.itm.adapt_b)));
    }
    out.l_be_y *= 2.0 / (double(P) * P * N);

    std::vector<Mat> ze = zt;
    if (opt.variant != Variant::itm) {
      for (int g = 0; g < G; ++g) {
        std::vector<Mat> q(gs), k(gs), v(gs);
        for (int a = 0; a < gs; ++a) {
          q[a] = matmul(zt[g * gs + a], V(p.etg.Wq));
          k[a] = matmul(zt[g * gs + a], V(p.etg.Wk));
          v[a] = matmul(zt[g * gs + a], V(p.etg.Wv));
        }
        for (int a = 0; a < m; ++a) {
          std::vector<double> sc(gs);
          for (int c = 0; c < gs; ++c) sc[c] = matmul(q[a], transpose(k[c]))(0, 0) / std::sqrt(double(D));
          const std::vector<double> w = softmax(sc);
          Mat acc = Mat::Zero(1, D);
          for (int c = 0; c < gs; ++c) acc += w[static_cast<std::size_t>(c)] * v[c];
          ze[g * gs + a] = acc;
        }
      }
    }
    for (int n = 0; n < N; ++n) y_trend[n] = affine(ze[n], V(p.itm.dec_W), V(p.itm.dec_b)).rightCols(P);
  }

  std::vector<Mat> yh(N);
  for (int n = 0; n < N; ++n) {
    const craft::ForecastSample& x = b.nodes[static_cast<std::size_t>(n)];
    const double sc = s[static_cast<std::size_t>(n)];
    Mat res(1, L);
    for (int j = 0; j < L; ++j) res(0, j) = x.y_L[j] / sc - ytrend[n](0, j);
    yh[n] = y_trend[n] + affine(res, V(p.res_y_W), V(p.res_y_b));
  }

  for (int g = 0; g < G; ++g)
    for (int j = 0; j < P; ++j) {
      double gap = m * yh[g * gs + m](0, j);
      for (int a = 0; a < m; ++a) gap -= yh[g * gs + a](0, j);
      out.l_recon += gap * gap;
    }
  out.l_recon /= double(G) * G;

  const bool banded = opt.variant == Variant::full;
  for (int n = 0; n < N; ++n) {
    const craft::ForecastSample& x = b.nodes[static_cast<std::size_t>(n)];
    const double sc = s[static_cast<std::size_t>(n)];
    for (int j = 0; j < P; ++j) {
      const double h = yh[n](0, j), y = x.y_P[j] / sc, lo = x.y_lower[j] / sc, hi = x.y_upper[j] / sc;
      double e = (h - y) * (h - y);
      if (banded && h < lo) e += opt.weights.beta * (h - lo) * (h - lo);
      if (banded && h > hi) e += opt.weights.beta * (h - hi) * (h - hi);
      out.l_y += e;
    }
  }
  out.l_y /= double(N) * P;

  const craft::LossWeights w = opt.effective_weights();
  out.total = out.l_y + w.alpha1 * out.l_be_k + w.alpha2 * out.l_be_y + w.alpha3 * out.l_recon;
  for (int n = 0; n < N; ++n) {
    Vec y(P);
    for (int j = 0; j < P; ++j) y[j] = yh[n](0, j) * s[static_cast<std::size_t>(n)];
    out.y_hat.push_back(y);
  }
  return out;
}

}  // namespace oracle
