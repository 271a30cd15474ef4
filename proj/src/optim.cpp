#include "craft/optim.hpp"

#include <cmath>

#include "craft/error.hpp"

namespace craft {

AdamState AdamState::fresh(const ParamTensor& p, const AdamConfig& cfg) {
  AdamState s;
  s.m = Mat::Zero(p.value.rows(), p.value.cols());
  s.v = Mat::Zero(p.value.rows(), p.value.cols());
  s.lr = cfg.lr;
  s.beta1 = cfg.beta1;
  s.beta2 = cfg.beta2;
  s.eps = cfg.eps;
  return s;
}

void adam_step(ParamTensor& param, AdamState& state) {
  if (param.grad.rows() != param.value.rows() || param.grad.cols() != param.value.cols() ||
      state.m.rows() != param.value.rows() || state.m.cols() != param.value.cols()) {
    throw DimensionError("adam_step: state does not match parameter " + param.name);
  }
  if (!all_finite(param.grad)) {
    throw ValueError("adam_step: non-finite gradient in " + param.name);
  }
  state.step += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * param.grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * param.grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  if (state.lr == 0.0) return;
  param.value.array() -=
      state.lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.eps);
}

Adam::Adam(std::vector<ParamTensor*> params, const AdamConfig& cfg) : params_(std::move(params)) {
  states_.reserve(params_.size());
  for (ParamTensor* p : params_) states_.push_back(AdamState::fresh(*p, cfg));
}

void Adam::step() {
  for (ParamTensor* p : params_) {
    if (!all_finite(p->grad)) throw ValueError("adam: non-finite gradient in " + p->name);
  }
  for (std::size_t i = 0; i < params_.size(); ++i) adam_step(*params_[i], states_[i]);
}

void Adam::zero_grad() {
  for (ParamTensor* p : params_) p->zero_grad();
}

}  // namespace craft
