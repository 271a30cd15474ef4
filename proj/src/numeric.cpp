#include "craft/numeric.hpp"

#include <cmath>
#include <sstream>

#include "craft/error.hpp"

namespace craft {

namespace {

std::string shape(const Mat& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void check_affine(const Mat& x, const Mat& W, const Vec& b, const char* op) {
  if (x.cols() != W.rows() || W.cols() != b.size()) {
    std::ostringstream os;
    os << op << ": shape mismatch x=" << shape(x) << " W=" << shape(W) << " b=" << b.size();
    throw DimensionError(os.str());
  }
}

}  // namespace

bool all_finite(const Mat& m) { return m.allFinite(); }
bool all_finite(const Vec& v) { return v.allFinite(); }

Mat linear_forward(const Mat& x, const Mat& W, const Vec& b) {
  check_affine(x, W, b, "linear_forward");
  Mat out = x * W;
  out.rowwise() += b.transpose();
  return out;
}

Mat tanh_fast(const Mat& x) {
  // tanh(|x|) = (1 - e) / (1 + e) with e = exp(-2|x|) never overflows.
  const Eigen::ArrayXXd e = (-2.0 * x.array().abs()).exp();
  Mat out = ((1.0 - e) / (1.0 + e)).matrix();
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (x.data()[i] < 0.0) out.data()[i] = -out.data()[i];
  }
  return out;
}

Mat mlp_forward(const Mat& x, const Mat& W, const Vec& b) {
  check_affine(x, W, b, "mlp_forward");
  return tanh_fast(linear_forward(x, W, b));
}

Mat ridge_solve(const Mat& A, const Mat& B, double lambda) {
  if (A.rows() != B.rows() || A.rows() < 1) {
    throw DimensionError("ridge_solve: A=" + shape(A) + " B=" + shape(B));
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw DomainError("ridge_solve: lambda must be finite and >= 0");
  }
  if (!all_finite(A) || !all_finite(B)) {
    throw ValueError("ridge_solve: non-finite input");
  }
  const Eigen::Index n = A.rows();
  const Eigen::Index d = A.cols();

  if (lambda > 0.0 && n < d) {
    Mat gram = A * A.transpose();
    gram.diagonal().array() += lambda;
    Eigen::LLT<Mat> llt(gram);
    if (llt.info() != Eigen::Success) {
      throw SingularityError("ridge_solve: dual system not positive definite");
    }
    return A.transpose() * llt.solve(B);
  }

  Mat normal = A.transpose() * A;
  normal.diagonal().array() += lambda;
  Eigen::LLT<Mat> llt(normal);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-13) {
    throw SingularityError("ridge_solve: normal equations are singular");
  }
  return llt.solve(A.transpose() * B);
}

Vec softmax_masked(const Vec& scores, const std::vector<bool>& active) {
  if (static_cast<std::size_t>(scores.size()) != active.size()) {
    throw DimensionError("softmax_masked: mask length mismatch");
  }
  double peak = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (active[i]) peak = std::max(peak, scores[i]);
  }
  if (peak == -std::numeric_limits<double>::infinity()) {
    throw DomainError("softmax_masked: empty active set");
  }
  Vec out = Vec::Zero(scores.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (!active[i]) continue;
    out[i] = std::exp(scores[i] - peak);
    total += out[i];
  }
  return out / total;
}

Mat xavier_init(std::size_t n_in, std::size_t n_out, Rng& rng) {
  const double sd = std::sqrt(2.0 / static_cast<double>(n_in + n_out));
  std::normal_distribution<double> dist(0.0, sd);
  Mat out(n_in, n_out);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = dist(rng);
  return out;
}

}  // namespace craft
