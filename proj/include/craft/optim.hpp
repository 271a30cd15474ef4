#pragma once

#include <cstdint>
#include <vector>

#include "craft/autograd.hpp"

namespace craft {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Mat m;
  Mat v;
  std::int64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState fresh(const ParamTensor& p, const AdamConfig& cfg = {});
};

/// One bias-corrected Adam update of `param` from its current grad.
/// Throws ValueError (leaving param and state untouched) if the gradient
/// contains NaN or Inf.
void adam_step(ParamTensor& param, AdamState& state);

/// Owns one AdamState per registered parameter.
class Adam {
 public:
  Adam(std::vector<ParamTensor*> params, const AdamConfig& cfg);
  void step();
  void zero_grad();

 private:
  std::vector<ParamTensor*> params_;
  std::vector<AdamState> states_;
};

}  // namespace craft
