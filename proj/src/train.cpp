#include "craft/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "craft/decomposition.hpp"
#include "craft/error.hpp"
#include "craft/optim.hpp"

namespace craft {

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ConfigError("split must be train, val or test, got '" + s + "'");
}

const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

DataView DataView::make(const HotelWorld& world, const TrainConfig& cfg) {
  cfg.validate();
  DataView d;
  d.world = &world;
  d.L = cfg.L;
  d.P = cfg.P;
  const std::vector<std::int32_t> origins = valid_origins(world, cfg.L, cfg.P);
  if (origins.empty()) throw ConfigError("no valid forecast origins for these window lengths");
  // A forecast window ends at t + P and a later look-back starts at t' - L + 1,
  // so L + P days between splits keep them disjoint.
  d.split = time_split(origins, {cfg.train_ratio, cfg.val_ratio, cfg.test_ratio}, cfg.L + cfg.P);
  return d;
}

const std::vector<std::int32_t>& DataView::origins(Split s) const {
  switch (s) {
    case Split::train: return split.train;
    case Split::val: return split.val;
    case Split::test: return split.test;
  }
  return split.test;
}

double training_value_scale(const DataView& data) {
  if (data.split.train.empty()) throw ConfigError("empty training split");
  const std::int32_t last = data.split.train.back();
  const double mean = data.world->labels.leftCols(last + 1).mean();
  return mean > 1e-6 ? mean : 1.0;
}

namespace {

std::vector<ForecastSample> build_all(const DataView& d, std::span<const std::int32_t> hotels, std::int32_t t) {
  std::vector<ForecastSample> out;
  out.reserve(hotels.size());
  for (std::int32_t h : hotels) out.push_back(build_sample(*d.world, h, t, d.L, d.P));
  return out;
}

HierGroup make_group(std::vector<ForecastSample> children) {
  HierGroup g;
  g.parent = virtual_parent(children);
  g.children = std::move(children);
  return g;
}

}  // namespace

NodeBatch sample_train_batch(const DataView& data, const TrainConfig& cfg, Rng& rng) {
  const HotelWorld& w = *data.world;
  const std::vector<std::int32_t> districts = w.district_ids();
  const std::vector<std::int32_t>& origins = data.split.train;
  if (districts.empty() || origins.empty()) throw ConfigError("empty training split");
  std::uniform_int_distribution<std::size_t> pick_d(0, districts.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_t(0, origins.size() - 1);
  std::vector<HierGroup> groups;
  groups.reserve(static_cast<std::size_t>(cfg.groups_per_batch));
  for (std::int32_t g = 0; g < cfg.groups_per_batch; ++g) {
    const std::int32_t district = districts[pick_d(rng)];
    const std::int32_t t = origins[pick_t(rng)];
    const std::vector<std::int32_t> hotels = w.hotels_in_district(district);
    if (hotels.size() < static_cast<std::size_t>(cfg.m)) {
      throw ConfigError("m exceeds the number of hotels in district " + std::to_string(district));
    }
    std::vector<double> weights;
    weights.reserve(hotels.size());
    for (std::int32_t h : hotels) {
      const auto row = static_cast<Eigen::Index>(w.slot(h));
      weights.push_back(w.labels.row(row).segment(t - data.L + 1, data.L).mean() + 1e-6);
    }
    std::vector<std::int32_t> chosen;
    for (std::size_t i : weighted_pick(weights, static_cast<std::size_t>(cfg.m), rng)) chosen.push_back(hotels[i]);
    groups.push_back(make_group(build_all(data, chosen, t)));
  }
  return make_batch(groups);
}

std::vector<EvalGroup> eval_groups(const HotelWorld& world, std::int32_t m, std::uint64_t seed) {
  if (m < 1) throw ConfigError("m must be positive");
  Rng rng(seed);
  std::vector<EvalGroup> out;
  for (std::int32_t d : world.district_ids()) {
    std::vector<std::int32_t> hotels = world.hotels_in_district(d);
    if (hotels.size() < static_cast<std::size_t>(m)) {
      throw ConfigError("m exceeds the number of hotels in district " + std::to_string(d));
    }
    std::shuffle(hotels.begin(), hotels.end(), rng);
    for (std::size_t at = 0; at < hotels.size(); at += static_cast<std::size_t>(m)) {
      EvalGroup g;
      g.district_id = d;
      const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(m), hotels.size() - at);
      g.hotels.assign(hotels.begin() + static_cast<std::ptrdiff_t>(at),
                      hotels.begin() + static_cast<std::ptrdiff_t>(at + take));
      g.reported = static_cast<std::int32_t>(take);
      for (std::size_t k = 0; g.hotels.size() < static_cast<std::size_t>(m); ++k) g.hotels.push_back(hotels[k]);
      out.push_back(std::move(g));
    }
  }
  return out;
}

std::string TrainHistory::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "# parameters " << parameter_count << "\n";
  for (const EpochRecord& e : epochs) {
    os << "epoch " << e.epoch << " steps " << e.steps << " train_loss " << e.train_loss << " val_wmape ";
    if (e.val_wmape) {
      os << *e.val_wmape;
    } else {
      os << "nan";
    }
    os << "\n";
  }
  if (aborted) os << "aborted " << abort_reason << "\n";
  return os.str();
}

std::int64_t steps_per_epoch(const DataView& data, const TrainConfig& cfg) {
  const std::int64_t children = static_cast<std::int64_t>(data.world->hotels.size()) *
                                static_cast<std::int64_t>(data.split.train.size());
  const std::int64_t per_batch = static_cast<std::int64_t>(cfg.m) * cfg.groups_per_batch;
  return std::max<std::int64_t>(1, (children + per_batch - 1) / per_batch);
}

namespace {

bool grads_finite(const std::vector<ParamTensor*>& ps) {
  for (const ParamTensor* p : ps) {
    if (!all_finite(p->grad)) return false;
  }
  return true;
}

std::int64_t total_steps(const DataView& data, const TrainConfig& cfg) {
  std::int64_t steps = steps_per_epoch(data, cfg) * cfg.epochs;
  if (cfg.max_steps > 0) steps = std::min<std::int64_t>(steps, cfg.max_steps);
  return steps;
}

constexpr std::uint64_t kSamplerSalt = 0x5deece66dULL;

}  // namespace

TrainResult train(const DataView& data, const TrainConfig& cfg, const StepHook& hook) {
  cfg.validate();
  TrainResult r{CraftParams::init(cfg.L, cfg.P, cfg.D, cfg.seed), {}};
  r.params.value_scale = training_value_scale(data);
  r.history.parameter_count = r.params.parameter_count();
  const ForwardOptions opt = ForwardOptions::from(cfg);
  std::vector<ParamTensor*> ps = r.params.tensors();
  Adam adam(ps, AdamConfig{cfg.lr});
  Rng rng(cfg.seed ^ kSamplerSalt);

  const std::int64_t per_epoch = steps_per_epoch(data, cfg);
  const std::int64_t steps = total_steps(data, cfg);
  double epoch_sum = 0.0;
  std::int64_t epoch_steps = 0;
  auto close_epoch = [&](std::int64_t done) {
    EpochRecord e;
    e.epoch = static_cast<std::int32_t>(r.history.epochs.size()) + 1;
    e.steps = done;
    e.train_loss = epoch_steps > 0 ? epoch_sum / static_cast<double>(epoch_steps) : 0.0;
    // After an abort the parameters may be finite but useless, so skip scoring.
    if (!data.split.val.empty() && !r.history.aborted) {
      const MetricReport v = evaluate(r.params, data, cfg, Split::val);
      e.val_wmape = v.wmape;
    }
    r.history.epochs.push_back(e);
    epoch_sum = 0.0;
    epoch_steps = 0;
  };

  for (std::int64_t step = 0; step < steps; ++step) {
    const NodeBatch batch = sample_train_batch(data, cfg, rng);
    adam.zero_grad();
    ad::Tape tape;
    LossParts parts;
    try {
      const CraftTrace tr = craft_forward(tape, r.params, batch, opt, true);
      parts = tr.parts();
      if (!std::isfinite(parts.total)) throw ValueError("non-finite training loss");
      tape.backward(tr.total);
      if (!grads_finite(ps)) throw ValueError("non-finite gradient");
      adam.step();
    } catch (const NumericError& e) {
      r.history.aborted = true;
      r.history.abort_reason = "step " + std::to_string(step) + ": " + e.what();
      break;
    }
    r.history.step_loss.push_back(parts.total);
    if (hook) hook(step, parts);
    epoch_sum += parts.total;
    ++epoch_steps;
    if ((step + 1) % per_epoch == 0) close_epoch(step + 1);
  }
  if (epoch_steps > 0) close_epoch(static_cast<std::int64_t>(r.history.step_loss.size()));
  return r;
}

Predictions predict_split(CraftParams& params, const DataView& data, const TrainConfig& cfg, Split split) {
  const std::vector<std::int32_t>& origins = data.origins(split);
  if (origins.empty()) throw ConfigError(std::string("empty ") + to_string(split) + " split");
  const ForwardOptions opt = ForwardOptions::from(cfg);
  const std::vector<EvalGroup> groups = eval_groups(*data.world, cfg.m, cfg.seed);
  const std::int32_t P = data.P;

  std::vector<double> yhat, y;
  double gap_sum = 0.0;
  std::int64_t gap_n = 0;
  LossParts loss;
  std::int64_t batches = 0;
  Predictions out;

  std::vector<HierGroup> pending;
  std::vector<const EvalGroup*> pending_meta;
  auto flush = [&]() {
    if (pending.empty()) return;
    const NodeBatch batch = make_batch(pending);
    const CraftResult res = craft_forward(params, batch, opt);
    loss.l_y += res.loss.l_y;
    loss.l_be_k += res.loss.l_be_k;
    loss.l_be_y += res.loss.l_be_y;
    loss.l_recon += res.loss.l_recon;
    loss.total += res.loss.total;
    ++batches;
    const std::int32_t size = batch.layout.group_size();
    for (std::size_t g = 0; g < pending.size(); ++g) {
      const std::size_t base = g * static_cast<std::size_t>(size);
      Vec sum = Vec::Zero(P);
      for (std::int32_t c = 0; c < batch.layout.children; ++c) {
        const std::size_t n = base + static_cast<std::size_t>(c);
        sum += res.nodes[n].y_hat;
        if (c >= pending_meta[g]->reported) continue;
        for (std::int32_t i = 0; i < P; ++i) {
          yhat.push_back(std::max(0.0, res.nodes[n].y_hat[i]));
          y.push_back(batch.nodes[n].y_P[i]);
        }
      }
      const Vec& parent = res.nodes[base + static_cast<std::size_t>(batch.layout.children)].y_hat;
      gap_sum += (parent - sum).cwiseAbs().sum();
      gap_n += P;
    }
    out.groups += static_cast<std::int64_t>(pending.size());
    pending.clear();
    pending_meta.clear();
  };

  for (std::int32_t t : origins) {
    for (const EvalGroup& g : groups) {
      pending.push_back(make_group(build_all(data, g.hotels, t)));
      pending_meta.push_back(&g);
      if (static_cast<std::int32_t>(pending.size()) == cfg.groups_per_batch) flush();
    }
  }
  flush();

  out.y_hat = Eigen::Map<const Vec>(yhat.data(), static_cast<Eigen::Index>(yhat.size()));
  out.y = Eigen::Map<const Vec>(y.data(), static_cast<Eigen::Index>(y.size()));
  out.group_gap = gap_n > 0 ? gap_sum / static_cast<double>(gap_n) : 0.0;
  const double nb = static_cast<double>(std::max<std::int64_t>(1, batches));
  out.loss = LossParts{loss.l_y / nb, loss.l_be_k / nb, loss.l_be_y / nb, loss.l_recon / nb, loss.total / nb};
  return out;
}

MetricReport report_from(const Predictions& p) {
  MetricReport r;
  const PointMetrics pm = eval_point_metrics(p.y_hat, p.y);
  r.mae = pm.mae;
  r.rmse = pm.rmse;
  r.wmape = pm.wmape;
  r.iwr = iwr(p.y_hat, p.y, 1.0);
  r.phdi = phdi(p.y_hat, p.y, 1.0);
  r.loss_y = p.loss.l_y;
  r.loss_be_k = p.loss.l_be_k;
  r.loss_be_y = p.loss.l_be_y;
  r.loss_recon = p.loss.l_recon;
  r.group_gap = p.group_gap;
  r.samples = static_cast<std::int64_t>(p.y.size());
  return r;
}

MetricReport evaluate(CraftParams& params, const DataView& data, const TrainConfig& cfg, Split split) {
  return report_from(predict_split(params, data, cfg, split));
}

double AblationRow::mean() const {
  if (wmape.empty()) return 0.0;
  return std::accumulate(wmape.begin(), wmape.end(), 0.0) / static_cast<double>(wmape.size());
}

std::vector<AblationRow> run_ablation(const DataView& data, const TrainConfig& cfg, std::int32_t seeds) {
  if (seeds < 1) throw ConfigError("ablation needs at least one seed");
  std::vector<AblationRow> rows;
  for (Variant v : {Variant::kpm_only, Variant::itm, Variant::itm_etg, Variant::full}) {
    AblationRow row;
    row.variant = v;
    for (std::int32_t k = 0; k < seeds; ++k) {
      TrainConfig c = cfg;
      c.variant = v;
      c.seed = cfg.seed + static_cast<std::uint64_t>(k);
      TrainResult tr = train(data, c);
      const MetricReport rep = evaluate(tr.params, data, c, Split::test);
      if (!rep.wmape) throw UndefinedMetric("ablation: test labels sum to zero");
      row.wmape.push_back(*rep.wmape);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "variant\tmean_wmape";
  const std::size_t seeds = rows.empty() ? 0 : rows.front().wmape.size();
  for (std::size_t k = 0; k < seeds; ++k) os << "\tseed" << k;
  os << "\n";
  for (const AblationRow& r : rows) {
    os << to_string(r.variant) << "\t" << r.mean();
    for (double w : r.wmape) os << "\t" << w;
    os << "\n";
  }
  return os.str();
}

DLinearParams DLinearParams::init(std::int32_t L, std::int32_t P, std::uint64_t seed) {
  Rng rng(seed);
  DLinearParams p;
  p.trend_W = ParamTensor("dlinear.trend_W", xavier_init(L, P, rng));
  p.trend_b = ParamTensor("dlinear.trend_b", Mat::Zero(1, P));
  p.res_W = ParamTensor("dlinear.res_W", xavier_init(L, P, rng));
  p.res_b = ParamTensor("dlinear.res_b", Mat::Zero(1, P));
  return p;
}

std::vector<ParamTensor*> DLinearParams::tensors() { return {&trend_W, &trend_b, &res_W, &res_b}; }

namespace {

struct LabelInputs {
  Mat trend, res, y;
};

LabelInputs label_inputs(std::span<const ForecastSample> nodes, int kernel, double scale) {
  const std::int32_t L = nodes.front().L, P = nodes.front().P;
  const int k = fit_kernel(kernel, L);
  LabelInputs in;
  const auto N = static_cast<Eigen::Index>(nodes.size());
  in.trend.resize(N, L);
  in.res.resize(N, L);
  in.y.resize(N, P);
  for (Eigen::Index n = 0; n < N; ++n) {
    const ForecastSample& s = nodes[static_cast<std::size_t>(n)];
    const TrendResidual tr = decompose(s.y_L, k);
    in.trend.row(n) = tr.trend.transpose() / scale;
    in.res.row(n) = tr.residual.transpose() / scale;
    in.y.row(n) = s.y_P.transpose() / scale;
  }
  return in;
}

ad::Var dlinear_forward(ad::Tape& t, DLinearParams& p, const LabelInputs& in, bool trainable) {
  const ad::Var trend = ad::affine(t.constant(in.trend), ad::bind(t, p.trend_W, trainable),
                                   ad::bind(t, p.trend_b, trainable));
  const ad::Var res = ad::affine(t.constant(in.res), ad::bind(t, p.res_W, trainable),
                                 ad::bind(t, p.res_b, trainable));
  return ad::add(trend, res);
}

}  // namespace

MetricReport baseline_dlinear(const DataView& data, const TrainConfig& cfg, Split split) {
  cfg.validate();
  DLinearParams p = DLinearParams::init(cfg.L, cfg.P, cfg.seed);
  p.value_scale = training_value_scale(data);
  const int kernel = cfg.effective_kernel();
  std::vector<ParamTensor*> ps = p.tensors();
  Adam adam(ps, AdamConfig{cfg.lr});
  Rng rng(cfg.seed ^ kSamplerSalt);
  const std::int64_t steps = total_steps(data, cfg);
  for (std::int64_t step = 0; step < steps; ++step) {
    const NodeBatch batch = sample_train_batch(data, cfg, rng);
    std::vector<ForecastSample> children;
    for (std::size_t n = 0; n < batch.nodes.size(); ++n) {
      if (!batch.layout.is_parent(static_cast<std::int32_t>(n))) children.push_back(batch.nodes[n]);
    }
    const LabelInputs in = label_inputs(children, kernel, p.value_scale);
    adam.zero_grad();
    ad::Tape t;
    const ad::Var loss = ad::mse(dlinear_forward(t, p, in, true), in.y);
    if (!std::isfinite(loss.scalar())) throw ValueError("baseline: non-finite training loss");
    t.backward(loss);
    adam.step();
  }

  const std::vector<std::int32_t>& origins = data.origins(split);
  if (origins.empty()) throw ConfigError(std::string("empty ") + to_string(split) + " split");
  const std::vector<EvalGroup> groups = eval_groups(*data.world, cfg.m, cfg.seed);
  std::vector<double> yhat, y;
  double loss_sum = 0.0;
  std::int64_t loss_n = 0;
  for (std::int32_t t : origins) {
    std::vector<ForecastSample> nodes;
    for (const EvalGroup& g : groups) {
      for (std::int32_t c = 0; c < g.reported; ++c) nodes.push_back(build_sample(*data.world, g.hotels[c], t, data.L, data.P));
    }
    const LabelInputs in = label_inputs(nodes, kernel, p.value_scale);
    ad::Tape tape;
    const ad::Var pred = dlinear_forward(tape, p, in, false);
    loss_sum += ad::mse(pred, in.y).scalar();
    ++loss_n;
    const Mat& v = pred.value();
    for (Eigen::Index n = 0; n < v.rows(); ++n) {
      for (Eigen::Index i = 0; i < v.cols(); ++i) {
        yhat.push_back(std::max(0.0, v(n, i) * p.value_scale));
        y.push_back(nodes[static_cast<std::size_t>(n)].y_P[i]);
      }
    }
  }
  Predictions pr;
  pr.y_hat = Eigen::Map<const Vec>(yhat.data(), static_cast<Eigen::Index>(yhat.size()));
  pr.y = Eigen::Map<const Vec>(y.data(), static_cast<Eigen::Index>(y.size()));
  pr.loss.l_y = loss_sum / static_cast<double>(std::max<std::int64_t>(1, loss_n));
  pr.loss.total = pr.loss.l_y;
  return report_from(pr);
}

}  // namespace craft
