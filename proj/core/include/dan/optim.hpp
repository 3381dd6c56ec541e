#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "dan/tensor.hpp"

namespace dan {

/// Adam moment buffers and step counter for one parameter tensor.
struct AdamSlot {
  std::vector<real_t> m;
  std::vector<real_t> v;
  int64_t t = 0;
};

/// Optimizer state keyed by parameter name. beta/epsilon are the standard
/// Adam constants.
struct AdamState {
  real_t beta1 = 0.9;
  real_t beta2 = 0.999;
  real_t epsilon = 1e-8;
  std::unordered_map<std::string, AdamSlot> slots;

  AdamSlot& slot_for(const std::string& name, int64_t size);
};

/// Warmup-then-decay schedule: 1e-3 * min(1/sqrt(step), step/warmup).
/// step is 1-based.
real_t lr_at(int64_t step, int64_t warmup);

/// One bias-corrected Adam update of `param` using the gradient `grad`
/// (same length). direction=-1 descends, +1 ascends. Rejects non-finite
/// gradients.
void adam_step(Tensor& param, const std::vector<real_t>& grad, AdamSlot& slot, const AdamState& config, real_t lr,
               int direction = -1);

/// Applies adam_step with the parameter's own accumulated gradient, then
/// clears it. No-op (moment decay only) when the gradient is absent.
void adam_step_param(const std::string& name, Tensor& param, AdamState& state, real_t lr, int direction = -1);

/// clip every component of the tensor into [-bound, bound]
void clip_weights(Tensor& t, real_t bound);

}  // namespace dan
