#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dan/data.hpp"
#include "dan/losses.hpp"
#include "dan/model.hpp"
#include "dan/optim.hpp"

namespace dan {

/// Every hyperparameter of the alternating min-max loop.
struct TrainConfig {
  LossWeights weights;        // alpha, beta, gamma (default 0.1 each)
  real_t lambda1 = 1.0;       // examiner lr scale
  real_t lambda2 = 1.0;       // main lr scale
  int m = 8;                  // per-domain batch size
  int n = -1;                 // examiner steps per iteration; -1 resolves per aligner (1 H / 5 W)
  int64_t warmup = 100;       // schedule constant
  int max_iterations = 1000;
  int patience = 10;          // evaluations without improvement before stopping
  int eval_every = 25;
  uint64_t seed = 1;
  ViewMode view_mode = ViewMode::Dual;
  AlignerKind aligner = AlignerKind::HAdversarial;
  int d_h = -1;               // -1: sampled from [100,300] by seed
  int d_f = -1;               // -1: sampled from [100,300] by seed
  real_t dropout = 0.1;
  real_t critic_clip = 0.01;  // Wasserstein weight-clip bound
  PoolKind pool = PoolKind::Mean;
  double val_fraction = 0.10;

  int resolved_n() const;
  void validate() const;
  /// Model hyperparameters implied by this config; samples d_h/d_f from
  /// [100,300] when unset.
  ModelSpec model_spec() const;
};

/// Component loss values of one step (absent slots were not part of the
/// configured objective).
struct StepLosses {
  std::optional<real_t> stance;
  std::optional<real_t> subj;
  std::optional<real_t> obj;
  std::optional<real_t> conf_subj;
  std::optional<real_t> conf_obj;
};

using Batch = std::vector<const Example*>;

Batch make_batch(const Corpus& corpus, const std::vector<int>& indices);

/// Maximisation step: gradient ascent on the confusion losses, touching
/// only the examiner parameters. Wasserstein critics are weight-clipped
/// afterwards. Requires an adversarial aligner. `dropout_rng` feeds the
/// encoder dropout and is mandatory when config.dropout > 0.
StepLosses max_step(DanModel& model, const Batch& batch_s, const Batch& batch_t, const TrainConfig& config,
                    AdamState& opt, int iteration, Rng* dropout_rng = nullptr);

/// Minimisation step: one combined backward over
/// stance + alpha*subj + beta*obj + gamma*(alignment terms), descending the
/// view functions, fusion gate, and classifier heads. Examiner parameters
/// are never updated here. With `fused_examiner_update` (the gradient-
/// reversal realization of the H variant) the same backward also trains the
/// examiners by ascent.
StepLosses min_step(DanModel& model, const Batch& batch_s, const Batch& batch_t, const TrainConfig& config,
                    AdamState& opt, int iteration, bool fused_examiner_update = false, Rng* dropout_rng = nullptr);

struct IterationRecord {
  int iteration = 0;
  real_t lr = 0;
  StepLosses losses;
  std::optional<real_t> val_macro_f1;
  double seconds = 0;
};

struct TrainReport {
  std::vector<IterationRecord> trace;
  std::vector<real_t> val_trace;
  int best_iteration = -1;
  real_t best_val_macro_f1 = -1;
  int iterations_run = 0;
  bool stopped_early = false;
};

/// Algorithm: repeat { sample batches; n x max_step (adversarial kinds);
/// min_step } with early stopping on validation macro-F1. The model ends at
/// the best-validation parameters. Deterministic given config.seed.
/// `log` (optional) receives one tab-separated line per iteration:
/// iteration, lr, L_stance, L_subj, L_obj, L_conf_subj, L_conf_obj,
/// val_macro_f1 (blank columns when not part of the run / not evaluated).
TrainReport train(DanModel& model, const Corpus& source_train, const Corpus& target, const Corpus& validation,
                  const TrainConfig& config, std::ostream* log = nullptr);

/// copy parameter values (not storage) from src into dst; shapes must match
void copy_params(DanModel& dst, DanModel& src);

/// Validation-set macro-F1 of the current model (inference path).
real_t evaluate_macro_f1(const DanModel& model, const Corpus& corpus);

}  // namespace dan
