#include "dan/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dan/errors.hpp"

namespace dan {

AdamSlot& AdamState::slot_for(const std::string& name, int64_t size) {
  AdamSlot& slot = slots[name];
  if (slot.m.empty()) {
    slot.m.assign(static_cast<size_t>(size), real_t(0));
    slot.v.assign(static_cast<size_t>(size), real_t(0));
  } else if (static_cast<int64_t>(slot.m.size()) != size) {
    throw std::invalid_argument("AdamState: parameter '" + name + "' changed size");
  }
  return slot;
}

real_t lr_at(int64_t step, int64_t warmup) {
  if (step < 1) throw std::invalid_argument("lr_at: step must be >= 1, got " + std::to_string(step));
  if (warmup < 1) throw std::invalid_argument("lr_at: warmup must be >= 1, got " + std::to_string(warmup));
  const real_t inv_sqrt = real_t(1) / std::sqrt(static_cast<real_t>(step));
  const real_t ramp = static_cast<real_t>(step) / static_cast<real_t>(warmup);
  return real_t(1e-3) * std::min(inv_sqrt, ramp);
}

void adam_step(Tensor& param, const std::vector<real_t>& grad, AdamSlot& slot, const AdamState& config, real_t lr,
               int direction) {
  if (static_cast<int64_t>(grad.size()) != param.size())
    throw std::invalid_argument("adam_step: gradient length " + std::to_string(grad.size()) +
                                " does not match parameter size " + std::to_string(param.size()));
  if (lr <= 0) throw std::invalid_argument("adam_step: lr must be positive");
  for (real_t g : grad)
    if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient component");

  slot.t += 1;
  const real_t b1 = config.beta1, b2 = config.beta2;
  const real_t corr1 = real_t(1) - std::pow(b1, static_cast<real_t>(slot.t));
  const real_t corr2 = real_t(1) - std::pow(b2, static_cast<real_t>(slot.t));
  real_t* p = param.data();
  for (size_t i = 0; i < grad.size(); ++i) {
    slot.m[i] = b1 * slot.m[i] + (real_t(1) - b1) * grad[i];
    slot.v[i] = b2 * slot.v[i] + (real_t(1) - b2) * grad[i] * grad[i];
    const real_t m_hat = slot.m[i] / corr1;
    const real_t v_hat = slot.v[i] / corr2;
    p[i] += direction * lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

void adam_step_param(const std::string& name, Tensor& param, AdamState& state, real_t lr, int direction) {
  AdamSlot& slot = state.slot_for(name, param.size());
  if (param.has_grad()) {
    adam_step(param, param.grad_vector(), slot, state, lr, direction);
  } else {
    adam_step(param, std::vector<real_t>(static_cast<size_t>(param.size()), real_t(0)), slot, state, lr, direction);
  }
}

void clip_weights(Tensor& t, real_t bound) {
  if (bound <= 0) throw std::invalid_argument("clip_weights: bound must be positive");
  real_t* p = t.data();
  for (int64_t i = 0; i < t.size(); ++i) p[i] = std::clamp(p[i], -bound, bound);
}

}  // namespace dan
