#include "craft/losses.hpp"

#include <cmath>
#include <fstream>

#include "craft/error.hpp"

namespace craft {

void LossWeights::validate() const {
  for (double a : {alpha1, alpha2, alpha3, beta}) {
    if (!std::isfinite(a) || a < 0.0) throw DomainError("loss weights must be finite and >= 0");
  }
}

namespace {

void same_length(const Vec& a, const Vec& b, const char* what) {
  if (a.size() != b.size()) throw DimensionError(std::string(what) + ": length mismatch");
  if (a.size() == 0) throw DimensionError(std::string(what) + ": empty input");
}

double banded(double yhat, double y, double lo, double hi, double beta) {
  const double e = yhat - y;
  double v = e * e;
  if (yhat < lo) v += beta * (yhat - lo) * (yhat - lo);
  if (yhat > hi) v += beta * (yhat - hi) * (yhat - hi);
  return v;
}

double banded_grad(double yhat, double y, double lo, double hi, double beta) {
  double g = 2.0 * (yhat - y);
  if (yhat < lo) g += 2.0 * beta * (yhat - lo);
  if (yhat > hi) g += 2.0 * beta * (yhat - hi);
  return g;
}

}  // namespace

double demand_loss(const Vec& yhat, const Vec& y, const Vec& y_l, const Vec& y_u, double beta) {
  same_length(yhat, y, "demand_loss");
  if (y_l.size() != y.size() || y_u.size() != y.size()) throw DimensionError("demand_loss: bound lengths");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y_l[i] > y_u[i]) throw ValueError("demand_loss: lower bound above upper bound");
    sum += banded(yhat[i], y[i], y_l[i], y_u[i], beta);
  }
  return sum / static_cast<double>(y.size());
}

double total_loss(double l_y, double l_be_k, double l_be_y, double l_recon, const LossWeights& w) {
  return l_y + w.alpha1 * l_be_k + w.alpha2 * l_be_y + w.alpha3 * l_recon;
}

namespace ad {

Var demand_loss(const Var& yhat, const Mat& y, const Mat& y_l, const Mat& y_u, double beta) {
  const Mat& p = yhat.value();
  if (p.rows() != y.rows() || p.cols() != y.cols() || y_l.rows() != y.rows() || y_l.cols() != y.cols() ||
      y_u.rows() != y.rows() || y_u.cols() != y.cols()) {
    throw DimensionError("demand_loss: shape mismatch");
  }
  if (y.size() == 0) throw DimensionError("demand_loss: empty input");
  const double n = static_cast<double>(y.size());
  Mat out(1, 1);
  Mat grad(p.rows(), p.cols());
  double sum = 0.0;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      if (y_l(r, c) > y_u(r, c)) throw ValueError("demand_loss: lower bound above upper bound");
      sum += banded(p(r, c), y(r, c), y_l(r, c), y_u(r, c), beta);
      grad(r, c) = banded_grad(p(r, c), y(r, c), y_l(r, c), y_u(r, c), beta) / n;
    }
  }
  out(0, 0) = sum / n;
  const std::size_t ip = yhat.id();
  return yhat.tape()->push(std::move(out), {yhat}, [ip, grad = std::move(grad)](Tape& t, std::size_t self) {
    t.accumulate(ip, grad * t.grad(self)(0, 0));
  });
}

Var mse(const Var& yhat, const Mat& y) {
  BoolMat all = BoolMat::Constant(y.rows(), y.cols(), true);
  return masked_sq_error(yhat, y, all, 1.0 / static_cast<double>(y.size()));
}

}  // namespace ad

PointMetrics eval_point_metrics(const Vec& yhat, const Vec& y) {
  same_length(yhat, y, "eval_point_metrics");
  const Vec err = (y - yhat).cwiseAbs();
  PointMetrics m;
  const double n = static_cast<double>(y.size());
  m.mae = err.sum() / n;
  m.rmse = std::sqrt(err.squaredNorm() / n);
  const double total = y.sum();
  if (total != 0.0) m.wmape = err.sum() / total;
  return m;
}

double wmape(const Vec& yhat, const Vec& y) {
  const PointMetrics m = eval_point_metrics(yhat, y);
  if (!m.wmape) throw UndefinedMetric("wmape: labels sum to zero");
  return *m.wmape;
}

double iwr(const Vec& yhat, const Vec& y, double b) {
  same_length(yhat, y, "iwr");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (yhat[i] <= y[i] + b) continue;
    if (yhat[i] <= 0.0) throw ValueError("iwr: non-positive prediction in the waste branch");
    sum += (yhat[i] - y[i]) / yhat[i];
  }
  return sum / static_cast<double>(y.size());
}

double phdi(const Vec& yhat, const Vec& y, double b) {
  same_length(yhat, y, "phdi");
  double hits = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (yhat[i] < y[i] - b) hits += 1.0;
  }
  return hits / static_cast<double>(y.size());
}

double pearson(const Vec& x, const Vec& y) {
  if (x.size() != y.size()) throw DimensionError("pearson: length mismatch");
  if (x.size() < 2) throw DimensionError("pearson: need at least two points");
  const Vec dx = x.array() - x.mean();
  const Vec dy = y.array() - y.mean();
  const double sx = dx.squaredNorm(), sy = dy.squaredNorm();
  if (sx == 0.0 || sy == 0.0) throw UndefinedMetric("pearson: constant input");
  return dx.dot(dy) / std::sqrt(sx * sy);
}

std::vector<double> pearson_by_horizon(std::span<const ForecastSample> samples, std::int32_t p_max) {
  if (samples.size() < 2) throw DimensionError("pearson_by_horizon: need at least two samples");
  const std::int32_t P = samples.front().P;
  if (p_max < 1 || p_max > P) throw DimensionError("pearson_by_horizon: p_max outside 1..P");
  const auto n = static_cast<Eigen::Index>(samples.size());
  Vec label(n);
  Mat diag(n, p_max);
  for (Eigen::Index k = 0; k < n; ++k) {
    const ForecastSample& s = samples[static_cast<std::size_t>(k)];
    if (s.P != P) throw BatchError("pearson_by_horizon: mixed prediction lengths");
    label[k] = s.y_L.sum();
    for (std::int32_t i = 0; i < p_max; ++i) diag(k, i) = s.c_P.values(i, i);
  }
  std::vector<double> out;
  Vec acc = Vec::Zero(n);
  for (std::int32_t p = 1; p <= p_max; ++p) {
    acc += diag.col(p - 1);
    out.push_back(pearson(label, acc));
  }
  return out;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j{{"mae", mae},
                   {"rmse", rmse},
                   {"iwr", iwr},
                   {"phdi", phdi},
                   {"loss_y", loss_y},
                   {"loss_be_k", loss_be_k},
                   {"loss_be_y", loss_be_y},
                   {"loss_recon", loss_recon},
                   {"group_gap", group_gap},
                   {"samples", samples}};
  j["wmape"] = wmape ? nlohmann::json(*wmape) : nlohmann::json(nullptr);
  return j;
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
  try {
    MetricReport r;
    r.mae = j.at("mae").get<double>();
    r.rmse = j.at("rmse").get<double>();
    if (!j.at("wmape").is_null()) r.wmape = j.at("wmape").get<double>();
    r.iwr = j.at("iwr").get<double>();
    r.phdi = j.at("phdi").get<double>();
    r.loss_y = j.at("loss_y").get<double>();
    r.loss_be_k = j.at("loss_be_k").get<double>();
    r.loss_be_y = j.at("loss_be_y").get<double>();
    r.loss_recon = j.at("loss_recon").get<double>();
    r.group_gap = j.at("group_gap").get<double>();
    r.samples = j.at("samples").get<std::int64_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("metric report: ") + e.what());
  }
}

void write_report(const MetricReport& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << r.to_json().dump(2) << '\n';
}

MetricReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return MetricReport::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace craft
