#pragma once

#include "craft/numeric.hpp"

namespace craft {

struct TrendResidual {
  Vec trend;
  Vec residual;
  int kernel = 1;
};

/// Centered moving average with edge-replication padding of (k-1)/2 on each
/// side. Output has the input's length. k must be odd and 1 <= k <= 2n-1.
Vec moving_avg_trend(const Vec& series, int kernel);

/// residual = series - trend.
TrendResidual decompose(const Vec& series, int kernel);

/// Row-wise trend of a matrix (each row treated as its own series).
Mat trend_rows(const Mat& rows, int kernel);

/// Largest admissible odd kernel not exceeding `kernel` for a series of
/// length n, i.e. min(kernel, 2n-1) rounded down to odd.
int fit_kernel(int kernel, Eigen::Index n);

/// Default decomposition width for a prediction length: 7 -> 15, 14 -> 15,
/// 30 -> 31. Other lengths use 15 below 30 and 31 from 30 on.
int default_kernel(int prediction_length);

}  // namespace craft
