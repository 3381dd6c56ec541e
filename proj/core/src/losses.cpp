#include "dan/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "dan/errors.hpp"

namespace dan {

namespace {

void check_prob_row(const Tensor& p, const char* what) {
  real_t s = 0;
  for (int i = 0; i < p.size(); ++i) {
    if (p.at(i) < -1e-9) throw std::invalid_argument(std::string(what) + ": negative probability");
    s += p.at(i);
  }
  if (std::abs(s - real_t(1)) > 1e-6)
    throw std::invalid_argument(std::string(what) + ": probabilities sum to " + std::to_string(static_cast<double>(s)) +
                                ", expected 1");
}

}  // namespace

Tensor one_hot(int label, int n_classes) {
  if (label < 0 || label >= n_classes)
    throw std::invalid_argument("one_hot: label " + std::to_string(label) + " out of range [0," +
                                std::to_string(n_classes) + ")");
  Tensor t({n_classes});
  t.data()[label] = real_t(1);
  return t;
}

Tensor nll(const std::vector<Tensor>& yhat, const std::vector<Tensor>& y_onehot) {
  if (yhat.empty()) throw std::invalid_argument("nll: empty batch");
  if (yhat.size() != y_onehot.size())
    throw std::invalid_argument("nll: " + std::to_string(yhat.size()) + " predictions vs " +
                                std::to_string(y_onehot.size()) + " labels");
  Tensor acc;
  for (size_t i = 0; i < yhat.size(); ++i) {
    const Tensor& p = yhat[i];
    const Tensor& y = y_onehot[i];
    if (p.shape() != y.shape())
      throw std::invalid_argument("nll: prediction shape " + shape_str(p.shape()) + " vs label shape " +
                                  shape_str(y.shape()));
    check_prob_row(p, "nll");
    real_t ysum = 0;
    for (int j = 0; j < y.size(); ++j) {
      if (y.at(j) != real_t(0) && y.at(j) != real_t(1))
        throw std::invalid_argument("nll: labels must be one-hot");
      ysum += y.at(j);
    }
    if (ysum != real_t(1)) throw std::invalid_argument("nll: labels must be one-hot");
    Tensor term = sum(mul(ln(clamp_min(p, kProbFloor)), y));
    acc = acc.defined() ? add(acc, term) : term;
  }
  return scalar_mul(acc, real_t(-1));
}

Tensor nll(const std::vector<Tensor>& yhat, const std::vector<int>& labels, int n_classes) {
  std::vector<Tensor> onehots;
  onehots.reserve(labels.size());
  for (int l : labels) onehots.push_back(one_hot(l, n_classes));
  return nll(yhat, onehots);
}

Tensor confusion_h(const std::vector<Tensor>& d_scores, const std::vector<Domain>& domains) {
  if (d_scores.empty()) throw std::invalid_argument("confusion_h: empty batch");
  if (d_scores.size() != domains.size()) throw std::invalid_argument("confusion_h: scores/domains length mismatch");
  int n_source = 0, n_target = 0;
  for (Domain d : domains) (d == Domain::Source ? n_source : n_target)++;
  if (n_source == 0 || n_target == 0)
    throw std::invalid_argument("confusion_h: need at least one example from each domain, got " +
                                std::to_string(n_source) + " source / " + std::to_string(n_target) + " target");

  // component 0 is D(f) = P(source); component 1 is 1 - D(f)
  Tensor mask_src({2}, {1, 0});
  Tensor mask_tgt({2}, {0, 1});
  Tensor acc;
  for (size_t i = 0; i < d_scores.size(); ++i) {
    const Tensor& p = d_scores[i];
    if (p.shape() != std::vector<int>{2})
      throw std::invalid_argument("confusion_h: scores must be 2-way probabilities, got " + shape_str(p.shape()));
    check_prob_row(p, "confusion_h");
    Tensor term = sum(mul(ln(clamp_min(p, kProbFloor)), domains[i] == Domain::Source ? mask_src : mask_tgt));
    acc = acc.defined() ? add(acc, term) : term;
  }
  return acc;
}

Tensor confusion_w(const std::vector<Tensor>& critic_values, const std::vector<Domain>& domains) {
  if (critic_values.size() != domains.size())
    throw std::invalid_argument("confusion_w: values/domains length mismatch");
  Tensor src_sum, tgt_sum;
  int n_source = 0, n_target = 0;
  for (size_t i = 0; i < critic_values.size(); ++i) {
    const Tensor& v = critic_values[i];
    if (v.size() != 1)
      throw std::invalid_argument("confusion_w: critic values must be scalars, got " + shape_str(v.shape()));
    if (domains[i] == Domain::Source) {
      src_sum = src_sum.defined() ? add(src_sum, v) : v;
      ++n_source;
    } else {
      tgt_sum = tgt_sum.defined() ? add(tgt_sum, v) : v;
      ++n_target;
    }
  }
  if (n_source == 0 || n_target == 0)
    throw std::invalid_argument("confusion_w: need at least one example from each domain, got " +
                                std::to_string(n_source) + " source / " + std::to_string(n_target) + " target");
  return add(scalar_mul(src_sum, real_t(1) / n_source), scalar_mul(tgt_sum, real_t(-1) / n_target));
}

namespace {

// unbiased covariance via the centering matrix: X^T (I - 11^T/n) X / (n-1)
Tensor covariance(const std::vector<Tensor>& feats) {
  const int n = static_cast<int>(feats.size());
  Tensor x = stack_rows(feats);
  const int d = x.shape()[1];
  std::vector<real_t> h(static_cast<size_t>(n) * n, real_t(-1) / n);
  for (int i = 0; i < n; ++i) h[static_cast<size_t>(i) * n + i] += real_t(1);
  Tensor centering({n, n}, std::move(h));
  Tensor cov = matmul(transpose(x), matmul(centering, x));
  (void)d;
  return scalar_mul(cov, real_t(1) / (n - 1));
}

}  // namespace

Tensor coral(const std::vector<Tensor>& source_feats, const std::vector<Tensor>& target_feats) {
  if (source_feats.size() < 2 || target_feats.size() < 2)
    throw std::invalid_argument("coral: both batches need >= 2 examples (covariance undefined), got " +
                                std::to_string(source_feats.size()) + " / " + std::to_string(target_feats.size()));
  const int d = source_feats[0].shape()[0];
  if (target_feats[0].shape()[0] != d)
    throw std::invalid_argument("coral: feature width mismatch " + shape_str(source_feats[0].shape()) + " vs " +
                                shape_str(target_feats[0].shape()));
  Tensor c_s = covariance(source_feats);
  Tensor c_t = covariance(target_feats);
  Tensor diff = add(c_s, scalar_mul(c_t, real_t(-1)));
  return scalar_mul(sum(mul(diff, diff)), real_t(1) / (4.0 * d * d));
}

Tensor min_objective(const MinComponents& c, const LossWeights& w, AlignerKind kind) {
  if (!c.stance.defined()) throw std::invalid_argument("min_objective: stance loss is required");
  Tensor total = c.stance;
  if (c.subj.defined() && w.alpha != 0) total = add(total, scalar_mul(c.subj, w.alpha));
  if (c.obj.defined() && w.beta != 0) total = add(total, scalar_mul(c.obj, w.beta));
  if (kind != AlignerKind::None && w.gamma != 0) {
    if (c.align_subj.defined()) total = add(total, scalar_mul(c.align_subj, w.gamma));
    if (c.align_obj.defined()) total = add(total, scalar_mul(c.align_obj, w.gamma));
  }
  return total;
}

Tensor max_objective(const Tensor& conf_subj, const Tensor& conf_obj, AlignerKind kind) {
  if (!is_adversarial(kind))
    throw ConfigError("max_objective: requires an adversarial aligner, configured kind is " + to_string(kind));
  if (conf_subj.defined() && conf_obj.defined()) return add(conf_subj, conf_obj);
  if (conf_subj.defined()) return conf_subj;
  if (conf_obj.defined()) return conf_obj;
  throw std::invalid_argument("max_objective: no confusion losses given");
}

}  // namespace dan
