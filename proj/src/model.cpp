#include "craft/model.hpp"

#include "craft/decomposition.hpp"
#include "craft/error.hpp"

namespace craft {

CraftParams CraftParams::init(std::int32_t L, std::int32_t P, std::int32_t D, std::uint64_t seed) {
  if (P < 1 || L < P || D < 1) throw ConfigError("CraftParams: need L >= P >= 1 and D >= 1");
  Rng rng(seed);
  CraftParams p;
  p.L = L;
  p.P = P;
  p.D = D;
  p.kpm = KpmParams::init(P, D, rng);
  p.itm = ItmParams::init(L, P, D, rng);
  p.etg = EtgParams::init(D, rng);
  p.res_y_W = ParamTensor("res_y.W", xavier_init(L, P, rng));
  p.res_y_b = ParamTensor("res_y.b", Mat::Zero(1, P));
  p.res_c_W = ParamTensor("res_c.W", xavier_init(P, P, rng));
  p.res_c_b = ParamTensor("res_c.b", Mat::Zero(1, P));
  return p;
}

std::vector<ParamTensor*> CraftParams::tensors() {
  std::vector<ParamTensor*> out = kpm.tensors();
  for (ParamTensor* t : itm.tensors()) out.push_back(t);
  for (ParamTensor* t : etg.tensors()) out.push_back(t);
  for (ParamTensor* t : {&res_y_W, &res_y_b, &res_c_W, &res_c_b}) out.push_back(t);
  return out;
}

std::size_t CraftParams::parameter_count() {
  std::size_t n = 0;
  for (const ParamTensor* t : tensors()) n += static_cast<std::size_t>(t->value.size());
  return n;
}

ForwardOptions ForwardOptions::from(const TrainConfig& c) {
  ForwardOptions o;
  o.lambda = c.lambda;
  o.kernel = c.effective_kernel();
  o.scope = c.koopman_scope;
  o.variant = c.variant;
  o.weights = LossWeights{c.alpha1, c.alpha2, c.alpha3, c.beta};
  return o;
}

LossWeights ForwardOptions::effective_weights() const {
  LossWeights w = weights;
  if (variant == Variant::kpm_only) {
    w.alpha2 = 0.0;
    w.alpha3 = 0.0;
  }
  if (variant == Variant::itm) w.alpha3 = 0.0;
  return w;
}

NodeBatch make_batch(std::span<const HierGroup> groups) {
  if (groups.empty()) throw BatchError("make_batch: no groups");
  NodeBatch b;
  const std::size_t m = groups.front().children.size();
  if (m == 0) throw BatchError("make_batch: group without children");
  for (const HierGroup& g : groups) {
    if (g.children.size() != m) throw BatchError("make_batch: groups differ in size");
    for (const ForecastSample& c : g.children) b.nodes.push_back(c);
    b.nodes.push_back(g.parent);
  }
  const ForecastSample& first = b.nodes.front();
  for (const ForecastSample& s : b.nodes) {
    if (s.L != first.L || s.P != first.P) throw BatchError("make_batch: mixed window lengths");
  }
  b.layout = GroupLayout{static_cast<std::int32_t>(groups.size()), static_cast<std::int32_t>(m)};
  return b;
}

LossParts CraftTrace::parts() const {
  return LossParts{l_y.scalar(), l_be_k.scalar(), l_be_y.scalar(), l_recon.scalar(), total.scalar()};
}

namespace {

struct Targets {
  Mat y, y_lo, y_hi;   // N x P
  Mat c_truth;         // (N*P) x P
  Mat c_l_truth;       // (N*P) x P look-back CFB
  Mat y_res;           // N x L
};

Targets targets(const NodeBatch& b, const Vec& scale, int kernel) {
  const std::int32_t L = b.nodes.front().L, P = b.nodes.front().P;
  const auto N = static_cast<Eigen::Index>(b.nodes.size());
  const int k_label = fit_kernel(kernel, L);
  Targets t;
  t.y.resize(N, P);
  t.y_lo.resize(N, P);
  t.y_hi.resize(N, P);
  t.c_truth.resize(N * P, P);
  t.c_l_truth.resize(N * P, P);
  t.y_res.resize(N, L);
  for (Eigen::Index n = 0; n < N; ++n) {
    const ForecastSample& s = b.nodes[static_cast<std::size_t>(n)];
    const double inv = 1.0 / scale[n];
    t.y.row(n) = s.y_P.transpose() * inv;
    t.y_lo.row(n) = s.y_lower.transpose() * inv;
    t.y_hi.row(n) = s.y_upper.transpose() * inv;
    if (!s.c_P.truth || !s.c_Lmat.truth) throw DataError("craft_forward: CFB matrices without values");
    t.c_truth.middleRows(n * P, P) = *s.c_P.truth * inv;
    t.c_l_truth.middleRows(n * P, P) = *s.c_Lmat.truth * inv;
    t.y_res.row(n) = decompose(s.y_L, k_label).residual.transpose() * inv;
  }
  return t;
}

}  // namespace

CraftTrace craft_forward(ad::Tape& t, CraftParams& params, const NodeBatch& batch, const ForwardOptions& opt,
                         bool trainable) {
  const GroupLayout& lay = batch.layout;
  if (static_cast<std::int32_t>(batch.nodes.size()) != lay.nodes()) {
    throw BatchError("craft_forward: layout does not match the batch");
  }
  const std::int32_t L = batch.nodes.front().L, P = batch.nodes.front().P;
  if (L != params.L || P != params.P) throw BatchError("craft_forward: window lengths differ from the model");
  const std::int32_t N = lay.nodes();

  CraftTrace out;
  out.scale.resize(N);
  Vec recon_weight(N);
  for (std::int32_t n = 0; n < N; ++n) {
    const bool parent = lay.is_parent(n);
    out.scale[n] = params.value_scale * (parent ? lay.children : 1);
    recon_weight[n] = parent ? lay.children : 1.0;
  }
  const std::span<const double> scale(out.scale.data(), static_cast<std::size_t>(N));
  const Targets tg = targets(batch, out.scale, opt.kernel);

  KpmInputs kin = kpm_inputs(batch.nodes, opt.kernel, scale);
  kin.chunks.clear();
  switch (opt.scope) {
    case KoopmanScope::sample:
      for (std::int32_t n = 0; n < N; ++n) kin.chunks.emplace_back(n, 1);
      break;
    case KoopmanScope::group:
      for (std::int32_t g = 0; g < lay.groups; ++g) kin.chunks.emplace_back(g * lay.group_size(), lay.group_size());
      break;
    case KoopmanScope::batch:
      kin.chunks.emplace_back(0, N);
      break;
  }

  const KpmVars kv = bind(t, params.kpm, trainable);
  const KpmTrace kt = kpm_forward(kv, kin, opt.lambda);
  out.l_be_k = kt.loss_be_k;

  const ad::Var res_y_W = ad::bind(t, params.res_y_W, trainable);
  const ad::Var res_y_b = ad::bind(t, params.res_y_b, trainable);
  out.y_res = ad::affine(t.constant(tg.y_res), res_y_W, res_y_b);

  if (opt.variant == Variant::kpm_only) {
    out.y_trend = kt.y_init;
    out.l_be_y = t.constant(Mat::Zero(1, 1));
  } else {
    const ItmVars iv = bind(t, params.itm, trainable);
    const ItmTrace it = itm_forward(iv, itm_row_inputs(batch.nodes, opt.kernel, scale),
                                    label_trend_inputs(batch.nodes, opt.kernel, scale), kt.y_init, P);
    ad::Var z = it.zy_tilde;
    if (opt.variant != Variant::itm) z = etg_forward(bind(t, params.etg, trainable), z, lay);
    out.y_trend = itm_decode_tail(iv, z, P);

    const ad::Var res_c_W = ad::bind(t, params.res_c_W, trainable);
    const ad::Var res_c_b = ad::bind(t, params.res_c_b, trainable);
    out.c_trend = it.c_hat_trend;
    out.c_res = ad::affine(t.constant(tg.c_l_truth - kin.cl_trend), res_c_W, res_c_b);
    out.c_hat = ad::add(out.c_trend, out.c_res);
    out.l_be_y = loss_be_y(out.c_hat, tg.c_truth, N);
  }
  out.y_hat = ad::add(out.y_trend, out.y_res);

  out.l_recon = loss_recon(ad::scale_rows(out.y_hat, recon_weight), lay);
  out.l_y = opt.variant == Variant::full ? ad::demand_loss(out.y_hat, tg.y, tg.y_lo, tg.y_hi, opt.weights.beta)
                                         : ad::mse(out.y_hat, tg.y);

  const LossWeights w = opt.effective_weights();
  std::vector<ad::Var> terms{out.l_y};
  if (w.alpha1 != 0.0) terms.push_back(ad::scale(out.l_be_k, w.alpha1));
  if (w.alpha2 != 0.0) terms.push_back(ad::scale(out.l_be_y, w.alpha2));
  if (w.alpha3 != 0.0) terms.push_back(ad::scale(out.l_recon, w.alpha3));
  out.total = ad::add_scalars(terms);
  return out;
}

CraftResult craft_forward(CraftParams& params, const NodeBatch& batch, const ForwardOptions& opt) {
  ad::Tape t;
  const CraftTrace tr = craft_forward(t, params, batch, opt, false);
  CraftResult r;
  r.loss = tr.parts();
  const std::int32_t P = params.P;
  const Mat& y = tr.y_hat.value();
  r.nodes.resize(batch.nodes.size());
  for (std::size_t n = 0; n < batch.nodes.size(); ++n) {
    const auto row = static_cast<Eigen::Index>(n);
    r.nodes[n].y_hat = y.row(row).transpose() * tr.scale[row];
    if (opt.variant != Variant::kpm_only) {
      r.nodes[n].c_hat = tr.c_hat.value().middleRows(row * P, P) * tr.scale[row];
    }
  }
  return r;
}

CraftResult craft_forward(CraftParams& params, const HierGroup& group, const ForwardOptions& opt) {
  return craft_forward(params, make_batch(std::span<const HierGroup>(&group, 1)), opt);
}

}  // namespace craft
