#pragma once

// Dense real arithmetic shared by every model component.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace craft {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using BoolMat = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Rng = std::mt19937_64;

bool all_finite(const Mat& m);
bool all_finite(const Vec& v);

/// Elementwise tanh through the vectorized exp; within a few ulp of std::tanh.
Mat tanh_fast(const Mat& x);

/// Row-wise affine map followed by tanh: out[i,.] = tanh(x[i,.] W + b).
Mat mlp_forward(const Mat& x, const Mat& W, const Vec& b);

/// Row-wise affine map: out = x W + b.
Mat linear_forward(const Mat& x, const Mat& W, const Vec& b);

/// Solves (A^T A + lambda I) K = A^T B for K (d x q).
///
/// For lambda > 0 and fewer rows than columns the equivalent dual form
/// K = A^T (A A^T + lambda I)^{-1} B is used, which keeps the factorization
/// at n x n. Throws SingularityError when lambda == 0 and A^T A is singular,
/// ValueError on non-finite input, DomainError on lambda < 0.
Mat ridge_solve(const Mat& A, const Mat& B, double lambda);

/// Softmax restricted to the active entries; inactive entries are 0.
/// Throws DomainError when no entry is active.
Vec softmax_masked(const Vec& scores, const std::vector<bool>& active);

/// Gaussian entries with mean 0 and standard deviation sqrt(2 / (n_in + n_out)).
Mat xavier_init(std::size_t n_in, std::size_t n_out, Rng& rng);

}  // namespace craft
