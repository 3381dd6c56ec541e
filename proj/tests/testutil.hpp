#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dan/rng.hpp"
#include "dan/tensor.hpp"

namespace dantest {

using dan::real_t;
using dan::Tensor;

inline Tensor random_tensor(std::vector<int> shape, dan::Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<real_t>(rng.uniform(lo, hi));
  return t;
}

/// random values bounded away from zero (for kinked ops like relu)
inline Tensor random_tensor_nonzero(std::vector<int> shape, dan::Rng& rng, double mag_lo = 0.1, double mag_hi = 2.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) {
    double mag = rng.uniform(mag_lo, mag_hi);
    t.data()[i] = static_cast<real_t>(rng.uniform() < 0.5 ? -mag : mag);
  }
  return t;
}

/// relative error with a guarded denominator: behaves relatively for
/// O(1) gradients and absolutely (scaled) for tiny ones
inline double grad_rel_err(double analytic, double numeric) {
  double denom = std::max({std::abs(analytic), std::abs(numeric), 0.01});
  return std::abs(analytic - numeric) / denom;
}

/// Central-finite-difference oracle. `fn` maps the input tensors to a
/// scalar tensor; it is re-evaluated forward-only (no tape) at perturbed
/// inputs, independent of the reverse-mode path it is checking.
/// Returns the maximum guarded relative error over all input components.
inline double check_gradients(const std::function<Tensor(const std::vector<Tensor>&)>& fn,
                              std::vector<Tensor> inputs, double h = 1e-5) {
  // analytic gradients: one reverse pass
  std::vector<std::vector<real_t>> analytic;
  {
    dan::Tape tape;
    dan::Tape::Scope scope(tape);
    for (auto& t : inputs) tape.watch(t);
    Tensor loss = fn(inputs);
    tape.backward(loss);
    for (auto& t : inputs) analytic.push_back(t.grad_vector());
    for (auto& t : inputs) t.clear_grad();
  }

  double max_err = 0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    Tensor& t = inputs[i];
    for (int64_t j = 0; j < t.size(); ++j) {
      const real_t saved = t.data()[j];
      t.data()[j] = saved + static_cast<real_t>(h);
      double f_plus = static_cast<double>(fn(inputs).value());
      t.data()[j] = saved - static_cast<real_t>(h);
      double f_minus = static_cast<double>(fn(inputs).value());
      t.data()[j] = saved;
      double numeric = (f_plus - f_minus) / (2 * h);
      max_err = std::max(max_err, grad_rel_err(static_cast<double>(analytic[i][static_cast<size_t>(j)]), numeric));
    }
  }
  return max_err;
}

struct SweepResult {
  double max_rel_err = 0;
  std::string worst_case;
};

/// Finite-difference sweep over every primitive on randomized small shapes
/// (<= 8x8). Shared by the unit suite and the acceptance gate.
inline SweepResult primitive_gradient_sweep(uint64_t seed, int rounds = 3) {
  dan::Rng rng(seed);
  SweepResult result;

  // reduce arbitrary-shape outputs to a scalar through a FIXED random
  // weighting, so the full Jacobian is exercised, not just the sum
  // direction; the weight must not change between oracle re-evaluations
  auto check_weighted = [&](const std::string& name, std::function<Tensor(const std::vector<Tensor>&)> raw,
                            std::vector<Tensor> inputs) {
    Tensor probe = raw(inputs);  // no tape active: forward only
    Tensor w = random_tensor(probe.shape(), rng);
    double err = check_gradients(
        [raw, w](const std::vector<Tensor>& in) { return dan::sum(dan::mul(raw(in), w)); }, std::move(inputs));
    if (err > result.max_rel_err) {
      result.max_rel_err = err;
      result.worst_case = name;
    }
  };

  for (int round = 0; round < rounds; ++round) {
    const int m = 1 + rng.uniform_int(8);
    const int k = 1 + rng.uniform_int(8);
    const int n = 1 + rng.uniform_int(8);

    check_weighted("matmul(mat,mat)",
                   [](const std::vector<Tensor>& in) { return dan::matmul(in[0], in[1]); },
                   {random_tensor({m, k}, rng), random_tensor({k, n}, rng)});
    check_weighted("matmul(mat,vec)",
                   [](const std::vector<Tensor>& in) { return dan::matmul(in[0], in[1]); },
                   {random_tensor({m, k}, rng), random_tensor({k}, rng)});
    check_weighted("add", [](const std::vector<Tensor>& in) { return dan::add(in[0], in[1]); },
                   {random_tensor({m, n}, rng), random_tensor({m, n}, rng)});
    check_weighted("elementwise-mul", [](const std::vector<Tensor>& in) { return dan::mul(in[0], in[1]); },
                   {random_tensor({m, n}, rng), random_tensor({m, n}, rng)});
    check_weighted("concat", [](const std::vector<Tensor>& in) { return dan::concat(in[0], in[1]); },
                   {random_tensor({m}, rng), random_tensor({n}, rng)});
    check_weighted("sigmoid", [](const std::vector<Tensor>& in) { return dan::sigmoid(in[0]); },
                   {random_tensor({m, n}, rng, -2.0, 2.0)});
    check_weighted("tanh", [](const std::vector<Tensor>& in) { return dan::tanh(in[0]); },
                   {random_tensor({m, n}, rng, -2.0, 2.0)});
    check_weighted("relu", [](const std::vector<Tensor>& in) { return dan::relu(in[0]); },
                   {random_tensor_nonzero({m, n}, rng)});
    check_weighted("ln", [](const std::vector<Tensor>& in) { return dan::ln(in[0]); },
                   {random_tensor({m, n}, rng, 0.1, 3.0)});
    check_weighted("softmax(vec)", [](const std::vector<Tensor>& in) { return dan::softmax(in[0]); },
                   {random_tensor({n}, rng, -2.0, 2.0)});
    check_weighted("softmax(mat)", [](const std::vector<Tensor>& in) { return dan::softmax(in[0]); },
                   {random_tensor({m, n}, rng, -2.0, 2.0)});
    check_weighted("mean", [](const std::vector<Tensor>& in) { return dan::mean(in[0]); },
                   {random_tensor({m, n}, rng)});
    check_weighted("sum", [](const std::vector<Tensor>& in) { return dan::sum(in[0]); },
                   {random_tensor({m, n}, rng)});
    {
      const real_t c = static_cast<real_t>(rng.uniform(-2.0, 2.0));
      check_weighted("scalar-mul", [c](const std::vector<Tensor>& in) { return dan::scalar_mul(in[0], c); },
                     {random_tensor({m, n}, rng)});
    }
    // plumbing ops follow the same discipline
    check_weighted("clamp_min", [](const std::vector<Tensor>& in) { return dan::clamp_min(in[0], 0.1); },
                   {random_tensor_nonzero({m, n}, rng, 0.2, 2.0)});
    check_weighted("stack_rows",
                   [](const std::vector<Tensor>& in) { return dan::stack_rows({in[0], in[1], in[2]}); },
                   {random_tensor({n}, rng), random_tensor({n}, rng), random_tensor({n}, rng)});
    check_weighted("transpose", [](const std::vector<Tensor>& in) { return dan::transpose(in[0]); },
                   {random_tensor({m, n}, rng)});
  }
  return result;
}

}  // namespace dantest
