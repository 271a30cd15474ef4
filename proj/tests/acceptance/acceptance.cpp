// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "craft/checkpoint.hpp"
#include "craft/config.hpp"
#include "craft/dataset.hpp"
#include "craft/decomposition.hpp"
#include "craft/error.hpp"
#include "craft/train.hpp"
#include "support/fixtures.hpp"
#include "support/grad_suite.hpp"
#include "support/oracles.hpp"

using namespace craft;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Options {
  std::string cli;
  fs::path work;
  int seeds = 5;
  std::uint64_t world_seed = 1;
  std::string only;  // comma-free list of criterion digits, empty = all
  double budget_min = 20.0;
  std::string train_config;  // optional overrides for every training run
  std::string expect_fail;   // criteria known to be red; still printed as FAIL
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double x, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << x;
  return os.str();
}

int run(const std::string& cmd) {
  const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

// Checks accumulate a detail line; the first failure is kept.
struct Tally {
  bool ok = true;
  std::string first;
  int count = 0;
  void check(bool cond, const std::string& what) {
    ++count;
    if (!cond && ok) {
      ok = false;
      first = what;
    }
  }
};

Verdict ridge_oracle() {
  const auto start = Clock::now();
  Rng rng(20240601);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Mat A = grad_suite::randn(20, 8, rng), B = grad_suite::randn(20, 8, rng);
    for (double lam : {0.0, 0.1, 1.0}) {
      worst = std::max(worst, (ridge_solve(A, B, lam) - oracle::ridge(A, B, lam)).cwiseAbs().maxCoeff());
    }
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-8 && secs < 5.0, "max_abs " + fmt(worst, 3) + " (<= 1e-8), " + fmt(secs, 3) + " s (< 5)"};
}

Verdict gradients() {
  const auto start = Clock::now();
  double ops = 0.0, pipe = 0.0;
  std::string worst_op, worst_pipe;
  for (const auto& c : grad_suite::op_errors()) {
    if (c.error >= ops) {
      ops = c.error;
      worst_op = c.name;
    }
  }
  for (const auto& c : grad_suite::pipeline_errors()) {
    if (c.error >= pipe) {
      pipe = c.error;
      worst_pipe = c.name;
    }
  }
  const double secs = seconds_since(start);
  return {ops <= 1e-4 && pipe <= 1e-3 && secs < 60.0,
          "ops " + fmt(ops, 3) + " [" + worst_op + "] (<= 1e-4), pipeline " + fmt(pipe, 3) + " [" + worst_pipe +
              "] (<= 1e-3), " + fmt(secs, 3) + " s (< 60)"};
}

Vec v(std::initializer_list<double> xs) {
  Vec out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

bool near(double a, double b, double tol = 1e-9) { return std::abs(a - b) <= tol; }

Verdict formulas() {
  Tally t;
  // Cumulative bookings.
  t.check(early_to_cumulative(v({2, 5, 11})) == v({2, 7, 18}), "cumulative [2,5,11]");
  // Moving average with replicated edges.
  const Vec ma = moving_avg_trend(v({1, 2, 3, 4, 5}), 3);
  t.check(near(ma[0], 4.0 / 3) && near(ma[2], 3) && near(ma[4], 14.0 / 3), "moving average k=3");
  t.check(default_kernel(7) == 15 && default_kernel(14) == 15 && default_kernel(30) == 31, "default kernels");
  // KPM recovery loss over the known triangle.
  Mat truth(2, 2);
  truth << 1, 7, 2, 3;
  const CfbMatrix c = CfbMatrix::from_truth(0, truth);
  Mat off = c.values;
  off(0, 0) += 1;
  off(1, 0) += 1;
  off(1, 1) += 1;
  off(0, 1) += 50;
  t.check(near(loss_be_k(off, c), 1.5), "loss_be_k triangle 1.5");
  // Prediction bias loss over the full square.
  t.check(near(loss_be_y(truth.array() + 1.0, truth), 2.0), "loss_be_y square 2");
  // Reconstruction loss with 1/g^2.
  Mat y(3, 1);
  y << 3, 5, 10;
  t.check(near(loss_recon(y, GroupLayout{1, 2}), 4.0), "loss_recon 4");
  Mat y2(6, 1);
  y2 << 3, 5, 10, 1, 1, 4;
  t.check(near(loss_recon(y2, GroupLayout{2, 2}), 2.0), "loss_recon two groups 2");
  // Demand loss, three branches.
  t.check(demand_loss(v({3}), v({3}), v({2}), v({5}), 1.0) == 0.0, "demand inside band");
  t.check(near(demand_loss(v({1}), v({3}), v({2}), v({5}), 1.0), 5.0), "demand below band 5");
  t.check(near(demand_loss(v({6}), v({3}), v({2}), v({5}), 0.5), 9.5), "demand above band 9.5");
  t.check(near(total_loss(1, 1, 1, 1, LossWeights{}), 503.1), "total loss 503.1");
  // Metrics.
  const PointMetrics m = eval_point_metrics(v({2, 3}), v({1, 3}));
  t.check(near(m.mae, 0.5) && near(m.rmse, std::sqrt(0.5)) && near(*m.wmape, 0.25), "mae/rmse/wmape");
  t.check(wmape(v({0, 0, 0}), v({1, 4, 2})) == 1.0, "zero predictor wmape 1");
  t.check(near(iwr(v({5, 2}), v({3, 2}), 1.0), 0.2), "iwr b=1 0.2");
  t.check(phdi(v({1}), v({3}), 1.0) == 1.0 && phdi(v({1, 3}), v({3, 3}), 1.0) == 0.5, "phdi b=1");
  t.check(near(pearson(v({1, 2, 3, 4, 5}), v({2, 4, 5, 4, 5})), 0.7745966692414834), "pearson");
  // Ridge and attention hand cases.
  Mat I = Mat::Identity(3, 3);
  t.check((ridge_solve(I, I, 1.0) - 0.5 * I).cwiseAbs().maxCoeff() <= 1e-12, "ridge shrink 1/2");
  Rng rng(3);
  EtgParams h = EtgParams::init(1, rng);
  h.Wq.value = Mat::Constant(1, 1, 1.0);
  h.Wk.value = Mat::Constant(1, 1, 1.0);
  Mat two(2, 1);
  two << 0.0, std::sqrt(std::log(2.0));
  const Mat B = reconciliation_matrix(two, h);
  t.check(near(B(1, 0), 1.0 / 3) && near(B(1, 1), 2.0 / 3), "attention [1/3, 2/3]");
  const Vec sm = softmax_masked(v({0.0, std::log(3.0)}), {true, true});
  t.check(near(sm[0], 0.25) && near(sm[1], 0.75), "softmax [1/4, 3/4]");
  // Forward pass against the reference implementation, every variant.
  const HotelWorld w = fixture::small_world(3);
  const NodeBatch batch = fixture::micro_batch(w, 4, 2, 2, 2, 20);
  for (Variant var : {Variant::full, Variant::itm_etg, Variant::itm, Variant::kpm_only}) {
    CraftParams p = CraftParams::init(4, 2, 3, 17);
    fixture::jitter(p, 5, 0.2);
    p.value_scale = 4.0;
    ForwardOptions opt;
    opt.kernel = 3;
    opt.variant = var;
    const CraftResult got = craft_forward(p, batch, opt);
    const oracle::PipelineOut want = oracle::pipeline(p, batch, opt);
    double err = std::abs(got.loss.total - want.total) / std::max(1.0, std::abs(want.total));
    for (std::size_t n = 0; n < got.nodes.size(); ++n)
      err = std::max(err, (got.nodes[n].y_hat - want.y_hat[n]).cwiseAbs().maxCoeff());
    t.check(err <= 1e-9, std::string("pipeline oracle ") + to_string(var));
  }
  return {t.ok, std::to_string(t.count) + " examples" + (t.ok ? "" : ", first failure: " + t.first)};
}

Verdict masks() {
  // Zero gradient on the hidden triangle of the recovery loss.
  ParamTensor ch("ch", Mat::Constant(5, 5, 2.0));
  const CfbMatrix big = CfbMatrix::from_truth(0, Mat::Constant(5, 5, 1.0));
  {
    ad::Tape t;
    t.backward(ad::masked_sq_error(t.param(ch), big.values, big.mask, 2.0 / 25));
  }
  bool grad_ok = true;
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j < 5; ++j) grad_ok = grad_ok && ch.grad(i, j) == 0.0;

  // Perturb every unobserved CFB entry of every node and compare outputs.
  const HotelWorld w = fixture::small_world(3);
  const NodeBatch batch = fixture::micro_batch(w, 8, 4, 2, 2, 25);
  CraftParams p = CraftParams::init(8, 4, 5, 4);
  fixture::jitter(p, 4, 0.2);
  double worst = 0.0;
  for (Variant var : {Variant::full, Variant::kpm_only}) {
    ForwardOptions opt;
    opt.variant = var;
    const CraftResult base = craft_forward(p, batch, opt);
    for (std::size_t n = 0; n < batch.nodes.size(); ++n) {
      NodeBatch probe = batch;
      ForecastSample& s = probe.nodes[n];
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 12; ++j) {
          if (j < 4 && j > i) {
            s.c_P.values(i, j) += 1e3;
            (*s.c_P.truth)(i, j) += 1e3;
          }
          if (j > 8 + i) s.itm_rows(i, j) += 1e3;
        }
      }
      const CraftResult r = craft_forward(p, probe, opt);
      for (std::size_t k = 0; k < r.nodes.size(); ++k) {
        worst = std::max(worst, (r.nodes[k].y_hat - base.nodes[k].y_hat).cwiseAbs().maxCoeff());
        if (r.nodes[k].c_hat.size() > 0)
          worst = std::max(worst, (r.nodes[k].c_hat - base.nodes[k].c_hat).cwiseAbs().maxCoeff());
      }
    }
  }
  return {grad_ok && worst <= 1e-12,
          std::string("masked gradients ") + (grad_ok ? "0" : "NONZERO") + ", probe " + fmt(worst, 3) + " (<= 1e-12)"};
}

struct Experiments {
  std::vector<AblationRow> rows;  // kpm_only, itm, itm_etg, full
  std::vector<double> full_gap, off_gap, dlinear;
  double ablation_secs = 0.0;
};

Experiments run_experiments(const Options& o, const HotelWorld& world, bool need_gap, bool need_baseline) {
  Experiments e;
  const TrainConfig cfg =
      o.train_config.empty() ? TrainConfig{} : train_config_from_map(read_config_file(o.train_config));
  const DataView data = DataView::make(world, cfg);
  const auto start = Clock::now();
  for (Variant var : {Variant::kpm_only, Variant::itm, Variant::itm_etg, Variant::full}) {
    AblationRow row;
    row.variant = var;
    for (int k = 0; k < o.seeds; ++k) {
      TrainConfig c = cfg;
      c.variant = var;
      c.seed = cfg.seed + static_cast<std::uint64_t>(k);
      TrainResult r = train(data, c);
      const MetricReport rep = evaluate(r.params, data, c, Split::test);
      row.wmape.push_back(rep.wmape.value_or(NAN));
      if (var == Variant::full) e.full_gap.push_back(rep.group_gap);
      std::cerr << "  " << to_string(var) << " seed " << c.seed << " wmape " << fmt(row.wmape.back(), 5) << " gap "
                << fmt(rep.group_gap, 5) << (r.history.aborted ? " (aborted)" : "") << "\n";
    }
    e.rows.push_back(row);
  }
  e.ablation_secs = seconds_since(start);
  if (need_gap) {
    for (int k = 0; k < o.seeds; ++k) {
      TrainConfig c = cfg;
      c.alpha3 = 0.0;
      c.seed = cfg.seed + static_cast<std::uint64_t>(k);
      TrainResult r = train(data, c);
      e.off_gap.push_back(evaluate(r.params, data, c, Split::test).group_gap);
      std::cerr << "  full alpha3=0 seed " << c.seed << " gap " << fmt(e.off_gap.back(), 5) << "\n";
    }
  }
  if (need_baseline) {
    for (int k = 0; k < o.seeds; ++k) {
      TrainConfig c = cfg;
      c.seed = cfg.seed + static_cast<std::uint64_t>(k);
      e.dlinear.push_back(baseline_dlinear(data, c).wmape.value_or(NAN));
      std::cerr << "  dlinear seed " << c.seed << " wmape " << fmt(e.dlinear.back(), 5) << "\n";
    }
  }
  return e;
}

Verdict ablation(const Options& o, const Experiments& e) {
  const double kpm = e.rows[0].mean(), itm = e.rows[1].mean(), etg = e.rows[2].mean(), full = e.rows[3].mean();
  // Ordered full <= itm_etg <= itm <= kpm_only with at most one adjacent tie.
  const double pairs[3][2] = {{full, etg}, {etg, itm}, {itm, kpm}};
  int ties = 0;
  bool ordered = true;
  for (const auto& pr : pairs) {
    if (pr[0] <= pr[1]) continue;
    if (pr[0] - pr[1] <= 0.005) {
      ++ties;
    } else {
      ordered = false;
    }
  }
  ordered = ordered && ties <= 1;
  const double mins = e.ablation_secs / 60.0;
  return {ordered && mins < o.budget_min,
          "full " + fmt(full) + " <= itm_etg " + fmt(etg) + " <= itm " + fmt(itm) + " <= kpm_only " + fmt(kpm) +
              " (ties " + std::to_string(ties) + "/1), " + fmt(mins, 3) + " min (< " + fmt(o.budget_min, 3) + ")"};
}

Verdict cfb_value(const Experiments& e) {
  const double full = e.rows[3].mean(), base = mean(e.dlinear);
  return {base - full >= 0.01,
          "dlinear " + fmt(base) + " - full " + fmt(full) + " = " + fmt(base - full, 3) + " (>= 0.01)"};
}

Verdict reconciliation(const Experiments& e) {
  const double on = mean(e.full_gap), off = mean(e.off_gap);
  Rng rng(77);
  EtgParams p = EtgParams::init(6, rng);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const Mat r = reconciliation_matrix(grad_suite::randn(16, 6, rng, 4.0), p);
    worst = std::max(worst, (r.rowwise().sum().array() - 1.0).abs().maxCoeff());
  }
  return {on < off && worst <= 1e-12, "gap alpha3=0.1 " + fmt(on) + " < alpha3=0 " + fmt(off) +
                                          ", softmax row sums " + fmt(worst, 3) + " (<= 1e-12)"};
}

std::vector<double> read_pearson(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<double> out;
  int k = 0;
  double r = 0.0;
  while (in >> k >> r) out.push_back(r);
  return out;
}

Verdict pearson_diag(const Options& o) {
  std::vector<double> first, last;
  const std::int32_t P = TrainConfig{}.P;
  for (int k = 0; k < o.seeds; ++k) {
    const fs::path dir = o.work / ("world" + std::to_string(o.world_seed + static_cast<std::uint64_t>(k)));
    if (!fs::exists(dir / "world.json")) {
      if (run(o.cli + " generate --seed " + std::to_string(o.world_seed + k) + " --out " + dir.string()) != 0)
        return {false, "generate failed for " + dir.string()};
    }
    const fs::path out = o.work / ("pearson" + std::to_string(k) + ".tsv");
    if (run(o.cli + " diagnose pearson --data " + dir.string() + " --pmax " + std::to_string(P) + " --out " +
            out.string()) != 0)
      return {false, "diagnose pearson failed"};
    const std::vector<double> c = read_pearson(out);
    if (static_cast<std::int32_t>(c.size()) != P) return {false, "unexpected pearson table"};
    first.push_back(c.front());
    last.push_back(c.back());
  }
  return {mean(first) > mean(last),
          "p=1 " + fmt(mean(first)) + " > p=" + std::to_string(P) + " " + fmt(mean(last))};
}

Verdict plumbing(const Options& o) {
  Tally t;
  const fs::path dir = o.work / "plumbing";
  fs::create_directories(dir);
  const std::string& cli = o.cli;

  WorldConfig wc = fixture::small_world_config();
  wc.horizon_days = 120;
  write_text(dir / "world.cfg", to_config_text(wc));
  const fs::path data = dir / "data";
  t.check(run(cli + " generate --config " + (dir / "world.cfg").string() + " --seed 4 --out " + data.string()) == 0,
          "generate exit 0");

  TrainConfig tc;
  tc.L = 14;
  tc.P = 7;
  tc.D = 8;
  tc.m = 3;
  tc.groups_per_batch = 2;
  tc.max_steps = 15;
  write_text(dir / "train.cfg", to_config_text(tc));
  const std::string train_args = " train --config " + (dir / "train.cfg").string() + " --data " + data.string();
  t.check(run(cli + train_args + " --out " + (dir / "run1").string()) == 0, "train exit 0");
  t.check(run(cli + train_args + " --out " + (dir / "run2").string()) == 0, "second train exit 0");
  const std::string ck1 = slurp(dir / "run1" / "model.ckpt"), ck2 = slurp(dir / "run2" / "model.ckpt");
  t.check(!ck1.empty() && ck1 == ck2, "same-seed checkpoints bitwise equal");

  // Checkpoint round trip.
  Checkpoint ck = load_checkpoint(dir / "run1" / "model.ckpt");
  t.check(encode_checkpoint(ck.config, ck.params) == ck1, "checkpoint round trip");
  std::string wrong = ck1;
  wrong[8] = static_cast<char>(kCheckpointVersion + 1);
  write_text(dir / "wrong.ckpt", wrong);

  // Dataset round trip.
  const fs::path ds = dir / "test.jsonl";
  t.check(run(cli + " export --config " + (dir / "train.cfg").string() + " --data " + data.string() +
              " --split test --out " + ds.string()) == 0,
          "export exit 0");
  const std::vector<ForecastSample> xs = read_dataset(ds);
  write_dataset(xs, dir / "again.jsonl");
  t.check(!xs.empty() && slurp(ds) == slurp(dir / "again.jsonl"), "dataset round trip");

  t.check(run(cli + " eval --checkpoint " + (dir / "run1" / "model.ckpt").string() + " --data " + data.string() +
              " --split test --report " + (dir / "report.json").string()) == 0,
          "eval exit 0");
  t.check(run(cli + " eval --checkpoint " + (dir / "wrong.ckpt").string() + " --data " + data.string() +
              " --split test --report " + (dir / "r.json").string()) == 3,
          "version mismatch exit 3");
  t.check(run(cli + " frobnicate") == 2, "unknown subcommand exit 2");
  t.check(run(cli + " train --data " + data.string()) == 2, "missing flag exit 2");
  write_text(dir / "bad.cfg", "no_such_key = 1\n");
  t.check(run(cli + " train --config " + (dir / "bad.cfg").string() + " --data " + data.string() + " --out " +
              (dir / "bad").string()) == 2,
          "unknown config key exit 2");
  t.check(run(cli + train_args.substr(0, train_args.find(" --data")) + " --data " + (dir / "nowhere").string() +
              " --out " + (dir / "none").string()) == 3,
          "missing data exit 3");
  TrainConfig boom = tc;
  boom.lr = 1e300;
  write_text(dir / "boom.cfg", to_config_text(boom));
  t.check(run(cli + " train --config " + (dir / "boom.cfg").string() + " --data " + data.string() + " --out " +
              (dir / "boom").string()) == 4,
          "diverging training exit 4");
  return {t.ok, std::to_string(t.count) + " checks" + (t.ok ? "" : ", first failure: " + t.first)};
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app("CRAFT acceptance criteria");
  app.add_option("--cli", o.cli, "path to the craft executable")->required();
  std::string work;
  app.add_option("--work", work, "scratch directory")->required();
  app.add_option("--seeds", o.seeds, "seeds for the multi-seed criteria");
  app.add_option("--world-seed", o.world_seed, "first world seed");
  app.add_option("--only", o.only, "digits of the criteria to run, e.g. 1239");
  app.add_option("--budget-min", o.budget_min, "wall-clock budget of the ablation in minutes");
  app.add_option("--train-config", o.train_config, "config file applied to the training criteria");
  app.add_option("--expect-fail", o.expect_fail,
                 "digits of criteria known to fail; exit 0 only if exactly these fail");
  CLI11_PARSE(app, argc, argv);
  o.work = work;
  fs::create_directories(o.work);

  auto wanted = [&](int k) { return o.only.empty() || o.only.find(static_cast<char>('0' + k)) != std::string::npos; };
  std::string failed;
  auto report = [&](int k, const std::string& name, const std::function<Verdict()>& f) {
    if (!wanted(k)) return;
    Verdict v;
    const auto start = Clock::now();
    try {
      v = f();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) failed += static_cast<char>('0' + k);
    std::cout << (v.pass ? "PASS" : "FAIL") << " " << k << " " << name << ": " << v.detail << " ["
              << fmt(seconds_since(start), 3) << " s]" << std::endl;
  };

  report(1, "ridge oracle", ridge_oracle);
  report(2, "gradient suite", gradients);
  report(3, "formula examples", formulas);
  report(4, "mask semantics", masks);

  Experiments ex;
  std::string ex_error;
  if (wanted(5) || wanted(6) || wanted(8)) {
    try {
      const fs::path dir = o.work / ("world" + std::to_string(o.world_seed));
      if (!fs::exists(dir / "world.json")) {
        if (run(o.cli + " generate --seed " + std::to_string(o.world_seed) + " --out " + dir.string()) != 0)
          throw DataError("generate failed");
      }
      const HotelWorld world = read_world(dir / "world.json");
      ex = run_experiments(o, world, wanted(8), wanted(6));
    } catch (const std::exception& e) {
      ex_error = e.what();
    }
  }
  auto guarded = [&](const std::function<Verdict()>& f) {
    return [&, f]() { return ex_error.empty() ? f() : Verdict{false, "experiments failed: " + ex_error}; };
  };
  report(5, "ablation ordering", guarded([&] { return ablation(o, ex); }));
  report(6, "CFB value over DLinear", guarded([&] { return cfb_value(ex); }));
  report(7, "pearson by horizon", [&] { return pearson_diag(o); });
  report(8, "reconciliation", guarded([&] { return reconciliation(ex); }));
  report(9, "reproducibility plumbing", [&] { return plumbing(o); });
  if (failed.empty() && o.expect_fail.empty()) return 0;
  std::string expected;
  for (int k = 1; k <= 9; ++k) {
    if (wanted(k) && o.expect_fail.find(static_cast<char>('0' + k)) != std::string::npos) expected += static_cast<char>('0' + k);
  }
  std::cout << "failed [" << failed << "], expected to fail [" << expected << "]" << std::endl;
  return failed == expected ? 0 : 1;
}
