#include "craft/decomposition.hpp"

#include <algorithm>
#include <string>

#include "craft/error.hpp"

namespace craft {

Vec moving_avg_trend(const Vec& series, int kernel) {
  const Eigen::Index n = series.size();
  if (kernel < 1 || kernel % 2 == 0) {
    throw ConfigError("moving_avg_trend: kernel must be odd and positive, got " +
                      std::to_string(kernel));
  }
  if (n == 0 || kernel > 2 * n - 1) {
    throw ConfigError("moving_avg_trend: kernel " + std::to_string(kernel) +
                      " too wide for length " + std::to_string(n));
  }
  const Eigen::Index half = (kernel - 1) / 2;
  auto at = [&](Eigen::Index i) { return series[std::clamp<Eigen::Index>(i, 0, n - 1)]; };
  Vec trend(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double sum = 0.0;
    for (Eigen::Index j = i - half; j <= i + half; ++j) sum += at(j);
    trend[i] = sum / kernel;
  }
  return trend;
}

TrendResidual decompose(const Vec& series, int kernel) {
  TrendResidual out;
  out.kernel = kernel;
  out.trend = moving_avg_trend(series, kernel);
  out.residual = series - out.trend;
  return out;
}

Mat trend_rows(const Mat& rows, int kernel) {
  Mat out(rows.rows(), rows.cols());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    out.row(r) = moving_avg_trend(rows.row(r).transpose(), kernel).transpose();
  }
  return out;
}

int fit_kernel(int kernel, Eigen::Index n) {
  int k = static_cast<int>(std::min<Eigen::Index>(kernel, 2 * n - 1));
  if (k % 2 == 0) --k;
  return std::max(k, 1);
}

int default_kernel(int prediction_length) {
  switch (prediction_length) {
    case 7:
    case 14:
      return 15;
    case 30:
      return 31;
    default:
      return prediction_length < 30 ? 15 : 31;
  }
}

}  // namespace craft
