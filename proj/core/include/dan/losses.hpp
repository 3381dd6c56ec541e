#pragma once

#include <vector>

#include "dan/modes.hpp"
#include "dan/tensor.hpp"

namespace dan {

/// Balancing coefficients of the joint objective.
struct LossWeights {
  real_t alpha = 0.1;
  real_t beta = 0.1;
  real_t gamma = 0.1;
};

/// Probability floor used before every log inside loss code. The raw ln
/// primitive stays strict; saturated classifier/examiner outputs must not
/// turn into infinities here.
inline constexpr real_t kProbFloor = 1e-12;

/// Negative log-likelihood summed over the batch (not averaged).
/// yhat: per-example probability vectors; y: matching one-hot vectors.
Tensor nll(const std::vector<Tensor>& yhat, const std::vector<Tensor>& y_onehot);
/// convenience overload taking class indices
Tensor nll(const std::vector<Tensor>& yhat, const std::vector<int>& labels, int n_classes);

Tensor one_hot(int label, int n_classes);

/// H-divergence confusion loss: sum of ln D(f) over source examples plus
/// ln(1-D(f)) over target examples, where each d_score is a 2-way
/// probability vector whose first component is the source probability.
/// Always <= 0; maximal at perfect discrimination.
Tensor confusion_h(const std::vector<Tensor>& d_scores, const std::vector<Domain>& domains);

/// Wasserstein critic loss: mean critic value over source minus mean over
/// target. Each critic value is a 1-element tensor.
Tensor confusion_w(const std::vector<Tensor>& critic_values, const std::vector<Domain>& domains);

/// Correlation alignment penalty: squared Frobenius distance between the
/// unbiased feature covariances, scaled by 1/(4 d^2).
Tensor coral(const std::vector<Tensor>& source_feats, const std::vector<Tensor>& target_feats);

/// Component losses entering the minimisation objective. Undefined slots are
/// simply absent (single-view or no-aligner configurations).
struct MinComponents {
  Tensor stance;
  Tensor subj;
  Tensor obj;
  Tensor align_subj;  // confusion (adversarial) or CORAL penalty per view
  Tensor align_obj;
};

/// stance + alpha*subj + beta*obj + gamma*(alignment terms); the gamma term
/// is absent for AlignerKind::None. Zero weights drop their term exactly.
Tensor min_objective(const MinComponents& c, const LossWeights& w, AlignerKind kind);

/// Sum of the configured confusion losses, the maximisation target of the
/// examiner phase. Rejected under non-adversarial aligners.
Tensor max_objective(const Tensor& conf_subj, const Tensor& conf_obj, AlignerKind kind);

}  // namespace dan
