#pragma once

// Training losses and evaluation metrics.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>

#include "json.hpp"

#include "craft/autograd.hpp"
#include "craft/world.hpp"

namespace craft {

struct LossWeights {
  double alpha1 = 500.0;
  double alpha2 = 2.0;
  double alpha3 = 0.1;
  double beta = 1.0;

  void validate() const;
};

/// Mean over entries of the banded squared error: (yhat-y)^2 plus
/// beta (yhat-bound)^2 whenever yhat leaves [y_l, y_u]. Throws ValueError
/// when y_l > y_u anywhere.
double demand_loss(const Vec& yhat, const Vec& y, const Vec& y_l, const Vec& y_u, double beta);

double total_loss(double l_y, double l_be_k, double l_be_y, double l_recon, const LossWeights& w);

namespace ad {
// Same reduction as craft::demand_loss over every entry of the matrices.
Var demand_loss(const Var& yhat, const Mat& y, const Mat& y_l, const Mat& y_u, double beta);
// Mean squared error over every entry.
Var mse(const Var& yhat, const Mat& y);
}  // namespace ad

struct PointMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  // Empty when sum(y) == 0.
  std::optional<double> wmape;
};

PointMetrics eval_point_metrics(const Vec& yhat, const Vec& y);
/// Throws UndefinedMetric when sum(y) == 0.
double wmape(const Vec& yhat, const Vec& y);

/// Inventory waste rate with buffer b.
double iwr(const Vec& yhat, const Vec& y, double b = 1.0);
/// Share of samples under-predicted by more than b.
double phdi(const Vec& yhat, const Vec& y, double b = 1.0);

/// Sample Pearson correlation. Throws UndefinedMetric for constant input.
double pearson(const Vec& x, const Vec& y);

/// Correlation across samples between sum(y_L) and the as-of-origin bookings
/// of the first p prediction days, for p = 1..p_max.
std::vector<double> pearson_by_horizon(std::span<const ForecastSample> samples, std::int32_t p_max);

struct MetricReport {
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> wmape;
  double iwr = 0.0;
  double phdi = 0.0;
  double loss_y = 0.0;
  double loss_be_k = 0.0;
  double loss_be_y = 0.0;
  double loss_recon = 0.0;
  // Mean over groups and horizon days of |parent - sum(children)|.
  double group_gap = 0.0;
  std::int64_t samples = 0;

  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);
  bool operator==(const MetricReport&) const = default;
};

void write_report(const MetricReport& r, const std::filesystem::path& path);
MetricReport read_report(const std::filesystem::path& path);

}  // namespace craft
