#include "dan/train.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>

#include "dan/errors.hpp"
#include "dan/metrics.hpp"

namespace dan {

int TrainConfig::resolved_n() const {
  if (!is_adversarial(aligner)) return 0;
  if (n >= 0) return n;
  // DANN couples examiner and encoder in one combined pass per iteration;
  // the Wasserstein critic wants several inner steps toward optimality.
  return aligner == AlignerKind::HAdversarial ? 1 : 5;
}

void TrainConfig::validate() const {
  if (m < 1) throw ConfigError("batch size m must be >= 1, got " + std::to_string(m));
  if (weights.alpha < 0 || weights.beta < 0 || weights.gamma < 0)
    throw ConfigError("loss weights alpha/beta/gamma must be non-negative");
  if (lambda1 < 0 || lambda2 < 0) throw ConfigError("lr scales lambda1/lambda2 must be non-negative");
  if (warmup < 1) throw ConfigError("warmup must be >= 1, got " + std::to_string(warmup));
  if (max_iterations < 0) throw ConfigError("max_iterations must be >= 0");
  if (patience < 0) throw ConfigError("patience must be >= 0");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (dropout < 0 || dropout >= 1) throw ConfigError("dropout must lie in [0,1)");
  if (critic_clip <= 0) throw ConfigError("critic_clip must be positive");
  if (val_fraction < 0 || val_fraction >= 1) throw ConfigError("val_fraction must lie in [0,1)");
  if (is_adversarial(aligner)) {
    if (n == 0) throw ConfigError("n=0 examiner steps configured under adversarial aligner " + to_string(aligner));
    if (n < -1) throw ConfigError("n must be -1 (auto) or >= 1");
  }
  if (d_h == 0 || d_h < -1 || d_f == 0 || d_f < -1) throw ConfigError("d_h/d_f must be positive or -1 (sampled)");
}

ModelSpec TrainConfig::model_spec() const {
  ModelSpec spec;
  // the paper draws the hidden sizes from [100, 300] per run
  Rng rng = Rng::derive(seed, 0xD1B5);
  spec.d_h = d_h > 0 ? d_h : 100 + rng.uniform_int(201);
  spec.d_f = d_f > 0 ? d_f : 100 + rng.uniform_int(201);
  spec.view_mode = view_mode;
  spec.aligner = aligner;
  spec.pool = pool;
  spec.dropout_rate = dropout;
  return spec;
}

Batch make_batch(const Corpus& corpus, const std::vector<int>& indices) {
  Batch b;
  b.reserve(indices.size());
  for (int i : indices) b.push_back(&corpus.examples.at(static_cast<size_t>(i)));
  return b;
}

namespace {

void check_model_matches(const DanModel& model, const TrainConfig& config, const char* who) {
  if (model.spec.aligner != config.aligner || model.spec.view_mode != config.view_mode)
    throw ConfigError(std::string(who) + ": model was built for aligner=" + to_string(model.spec.aligner) +
                      " view=" + to_string(model.spec.view_mode) + " but config says aligner=" +
                      to_string(config.aligner) + " view=" + to_string(config.view_mode));
}

Rng* require_rng(const TrainConfig& config, Rng* rng, const char* who) {
  if (config.dropout > 0 && !rng) throw ConfigError(std::string(who) + ": dropout is active but no rng was supplied");
  return rng;
}

std::vector<Tensor> encode_batch(const DanModel& model, ViewId view, const Batch& batch, Rng* rng) {
  std::vector<Tensor> out;
  out.reserve(batch.size());
  for (const Example* e : batch) out.push_back(encode_view(e->token_ids, model, view, /*train_mode=*/true, rng));
  return out;
}

std::vector<Domain> domain_tags(size_t n_source, size_t n_target) {
  std::vector<Domain> tags(n_source, Domain::Source);
  tags.insert(tags.end(), n_target, Domain::Target);
  return tags;
}

void apply_group_updates(DanModel& model, const std::vector<ParamGroup>& groups, AdamState& opt, real_t lr,
                         int direction) {
  for (ParamGroup g : groups)
    for (auto& [name, t] : model.group_params(g)) adam_step_param(name, t, opt, lr, direction);
}

/// the examiners' view of one batch: confusion loss per configured view
struct ConfusionPair {
  Tensor subj;
  Tensor obj;
};

ConfusionPair examiner_confusions(DanModel& model, const Batch& batch_s, const Batch& batch_t, Rng* rng) {
  ConfusionPair out;
  const auto tags = domain_tags(batch_s.size(), batch_t.size());
  for (ViewId view : {ViewId::Subj, ViewId::Obj}) {
    if (!model.has_examiner(view)) continue;
    std::vector<Tensor> feats = encode_batch(model, view, batch_s, rng);
    std::vector<Tensor> tgt = encode_batch(model, view, batch_t, rng);
    feats.insert(feats.end(), tgt.begin(), tgt.end());
    std::vector<Tensor> scores;
    scores.reserve(feats.size());
    for (const Tensor& f : feats) scores.push_back(examine(f, model, view));
    Tensor conf = model.spec.aligner == AlignerKind::Wasserstein ? confusion_w(scores, tags)
                                                                 : confusion_h(scores, tags);
    (view == ViewId::Subj ? out.subj : out.obj) = conf;
  }
  return out;
}

}  // namespace

StepLosses max_step(DanModel& model, const Batch& batch_s, const Batch& batch_t, const TrainConfig& config,
                    AdamState& opt, int iteration, Rng* dropout_rng) {
  if (!is_adversarial(config.aligner))
    throw ConfigError("max_step: requires an adversarial aligner, configured kind is " + to_string(config.aligner));
  check_model_matches(model, config, "max_step");
  require_rng(config, dropout_rng, "max_step");
  if (batch_s.empty() || batch_t.empty()) throw std::invalid_argument("max_step: empty batch");

  const real_t lr = config.lambda1 * lr_at(iteration, config.warmup);

  Tape tape;
  Tape::Scope scope(tape);
  model.watch_all(tape);
  ConfusionPair conf = examiner_confusions(model, batch_s, batch_t, dropout_rng);
  Tensor objective = max_objective(conf.subj, conf.obj, config.aligner);
  tape.backward(objective);

  apply_group_updates(model, model.examiner_groups(), opt, lr, /*direction=*/+1);
  if (config.aligner == AlignerKind::Wasserstein)
    for (ParamGroup g : model.examiner_groups())
      for (auto& [name, t] : model.group_params(g)) clip_weights(t, config.critic_clip);
  model.clear_grads();

  StepLosses losses;
  if (conf.subj.defined()) losses.conf_subj = conf.subj.value();
  if (conf.obj.defined()) losses.conf_obj = conf.obj.value();
  return losses;
}

StepLosses min_step(DanModel& model, const Batch& batch_s, const Batch& batch_t, const TrainConfig& config,
                    AdamState& opt, int iteration, bool fused_examiner_update, Rng* dropout_rng) {
  check_model_matches(model, config, "min_step");
  require_rng(config, dropout_rng, "min_step");
  if (batch_s.empty()) throw std::invalid_argument("min_step: empty source batch");
  const bool want_alignment = config.aligner != AlignerKind::None && config.weights.gamma != 0;
  if (want_alignment && batch_t.empty()) throw std::invalid_argument("min_step: empty target batch");
  for (const Example* e : batch_s) {
    if (!e->stance) throw DataError("min_step: source example '" + e->id + "' has no stance label");
    if (model.has_subj_head() && !e->silver_subj)
      throw DataError("min_step: source example '" + e->id + "' has no silver subjectivity label");
    if (model.has_obj_head() && !e->silver_obj)
      throw DataError("min_step: source example '" + e->id + "' has no silver objectivity label");
  }
  if (fused_examiner_update && config.aligner != AlignerKind::HAdversarial)
    throw ConfigError("min_step: fused examiner update applies to the h-adversarial aligner only");

  const real_t lr_main = config.lambda2 * lr_at(iteration, config.warmup);
  const LossWeights& w = config.weights;

  Tape tape;
  Tape::Scope scope(tape);
  model.watch_all(tape);

  // source features per view
  std::vector<Tensor> f_subj_s = encode_batch(model, ViewId::Subj, batch_s, dropout_rng);
  std::vector<Tensor> f_obj_s;
  if (model.has_obj_encoder()) f_obj_s = encode_batch(model, ViewId::Obj, batch_s, dropout_rng);

  // stance head on the fused (dual) or lone (single) source feature; the
  // fusion is applied to source data only during training
  std::vector<Tensor> stance_probs;
  std::vector<int> stance_labels;
  stance_probs.reserve(batch_s.size());
  for (size_t i = 0; i < batch_s.size(); ++i) {
    Tensor feat = model.has_gate() ? fuse(f_subj_s[i], f_obj_s[i], model).second : f_subj_s[i];
    stance_probs.push_back(ffn_forward(feat, model.c_stance, FfnOutput::Probabilities));
    stance_labels.push_back(static_cast<int>(*batch_s[i]->stance));
  }
  Tensor l_stance = nll(stance_probs, stance_labels, kNumStanceClasses);

  MinComponents components;
  components.stance = l_stance;
  Tensor objective = l_stance;

  if (model.has_subj_head()) {
    std::vector<Tensor> probs;
    std::vector<int> labels;
    for (size_t i = 0; i < batch_s.size(); ++i) {
      probs.push_back(auxiliary_predict(f_subj_s[i], model.c_subj));
      labels.push_back(*batch_s[i]->silver_subj);
    }
    components.subj = nll(probs, labels, 2);
    if (w.alpha != 0) objective = add(objective, scalar_mul(components.subj, w.alpha));
  }
  if (model.has_obj_head()) {
    std::vector<Tensor> probs;
    std::vector<int> labels;
    for (size_t i = 0; i < batch_s.size(); ++i) {
      probs.push_back(auxiliary_predict(f_obj_s[i], model.c_obj));
      labels.push_back(*batch_s[i]->silver_obj);
    }
    components.obj = nll(probs, labels, 2);
    if (w.beta != 0) objective = add(objective, scalar_mul(components.obj, w.beta));
  }

  if (want_alignment) {
    const auto tags = domain_tags(batch_s.size(), batch_t.size());
    for (ViewId view : {ViewId::Subj, ViewId::Obj}) {
      if (!model.view_aligned(view)) continue;

      std::vector<Tensor> src = view == ViewId::Subj ? f_subj_s : f_obj_s;
      std::vector<Tensor> tgt = encode_batch(model, view, batch_t, dropout_rng);

      Tensor term;
      if (config.aligner == AlignerKind::Coral) {
        term = coral(src, tgt);
        objective = add(objective, scalar_mul(term, w.gamma));
      } else if (config.aligner == AlignerKind::Wasserstein) {
        std::vector<Tensor> vals;
        for (const Tensor& f : src) vals.push_back(examine(f, model, view));
        for (const Tensor& f : tgt) vals.push_back(examine(f, model, view));
        term = confusion_w(vals, tags);
        objective = add(objective, scalar_mul(term, w.gamma));
      } else {
        // gradient reversal carries the gamma weight: descending the
        // negated confusion loss trains the examiner toward discrimination
        // while the encoders receive +gamma * d(conf)/d(f)
        std::vector<Tensor> scores;
        for (const Tensor& f : src) scores.push_back(examine(reverse_gradient(f, w.gamma), model, view));
        for (const Tensor& f : tgt) scores.push_back(examine(reverse_gradient(f, w.gamma), model, view));
        term = confusion_h(scores, tags);
        objective = add(objective, scalar_mul(term, real_t(-1)));
      }
      (view == ViewId::Subj ? components.align_subj : components.align_obj) = term;
    }
  }

  tape.backward(objective);
  apply_group_updates(model, model.min_groups(), opt, lr_main, /*direction=*/-1);
  if (fused_examiner_update && !model.examiner_groups().empty() && want_alignment) {
    const real_t lr_exam = config.lambda1 * lr_at(iteration, config.warmup);
    apply_group_updates(model, model.examiner_groups(), opt, lr_exam, /*direction=*/-1);
  }
  model.clear_grads();

  StepLosses losses;
  losses.stance = components.stance.value();
  if (components.subj.defined()) losses.subj = components.subj.value();
  if (components.obj.defined()) losses.obj = components.obj.value();
  if (components.align_subj.defined()) losses.conf_subj = components.align_subj.value();
  if (components.align_obj.defined()) losses.conf_obj = components.align_obj.value();
  return losses;
}

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

real_t evaluate_macro_f1(const DanModel& model, const Corpus& corpus) {
  std::vector<int> pred, gold;
  pred.reserve(corpus.size());
  for (const auto& e : corpus.examples) {
    if (!e.stance) throw DataError("evaluate_macro_f1: example '" + e.id + "' has no stance label");
    pred.push_back(argmax(predict_stance(e.token_ids, model)));
    gold.push_back(static_cast<int>(*e.stance));
  }
  return macro_f1(pred, gold);
}

void copy_params(DanModel& dst, DanModel& src) {
  auto d = dst.named_params();
  auto s = src.named_params();
  if (d.size() != s.size()) throw std::invalid_argument("copy_params: mismatched parameter sets");
  for (size_t i = 0; i < d.size(); ++i) {
    if (d[i].first != s[i].first || d[i].second.shape() != s[i].second.shape())
      throw std::invalid_argument("copy_params: parameter mismatch at '" + d[i].first + "'");
    std::copy(s[i].second.data(), s[i].second.data() + s[i].second.size(), d[i].second.data());
  }
}

namespace {

void validate_corpus_for_training(const Corpus& corpus, const DanModel& model, const char* what, bool need_labels) {
  if (corpus.examples.empty()) throw DataError(std::string(what) + " corpus is empty");
  const int vocab = model.embeddings->vocab_size;
  for (const auto& e : corpus.examples) {
    if (e.token_ids.empty())
      throw DataError(std::string(what) + " example '" + e.id + "' has no tokens (token ids not assigned?)");
    for (int id : e.token_ids)
      if (id < 0 || id >= vocab)
        throw DataError(std::string(what) + " example '" + e.id + "' has token id " + std::to_string(id) +
                        " outside the embedding table (vocabulary mismatch)");
    if (need_labels) {
      if (!e.stance) throw DataError(std::string(what) + " example '" + e.id + "' is missing its stance label");
      if (model.has_subj_head() && !e.silver_subj)
        throw DataError(std::string(what) + " example '" + e.id + "' is missing its silver subjectivity label");
      if (model.has_obj_head() && !e.silver_obj)
        throw DataError(std::string(what) + " example '" + e.id + "' is missing its silver objectivity label");
    }
  }
}

std::string fmt_opt(const std::optional<real_t>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(12);
  os << *v;
  return os.str();
}

}  // namespace

TrainReport train(DanModel& model, const Corpus& source_train, const Corpus& target, const Corpus& validation,
                  const TrainConfig& config, std::ostream* log) {
  config.validate();
  check_model_matches(model, config, "train");
  validate_corpus_for_training(source_train, model, "source", /*need_labels=*/true);
  validate_corpus_for_training(target, model, "target", /*need_labels=*/false);
  if (!validation.examples.empty()) validate_corpus_for_training(validation, model, "validation", true);

  TrainReport report;
  AdamState opt;
  Rng dropout_rng = Rng::derive(config.seed, 0xD80);
  const int n = config.resolved_n();

  DanModel best;
  bool have_best = false;
  int evals_since_improvement = 0;

  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    auto t0 = std::chrono::steady_clock::now();
    BatchPair idx = sample_batches(source_train, target, config.m, config.seed, iter - 1);
    Batch batch_s = make_batch(source_train, idx.source);
    Batch batch_t = make_batch(target, idx.target);

    StepLosses losses;
    switch (config.aligner) {
      case AlignerKind::HAdversarial: {
        for (int k = 1; k < n; ++k) max_step(model, batch_s, batch_t, config, opt, iter, &dropout_rng);
        losses = min_step(model, batch_s, batch_t, config, opt, iter, /*fused=*/true, &dropout_rng);
        break;
      }
      case AlignerKind::Wasserstein: {
        for (int k = 0; k < n; ++k) max_step(model, batch_s, batch_t, config, opt, iter, &dropout_rng);
        losses = min_step(model, batch_s, batch_t, config, opt, iter, /*fused=*/false, &dropout_rng);
        break;
      }
      default:
        losses = min_step(model, batch_s, batch_t, config, opt, iter, /*fused=*/false, &dropout_rng);
    }

    IterationRecord rec;
    rec.iteration = iter;
    rec.lr = lr_at(iter, config.warmup);
    rec.losses = losses;

    if (!validation.examples.empty() && iter % config.eval_every == 0) {
      real_t f1 = evaluate_macro_f1(model, validation);
      rec.val_macro_f1 = f1;
      report.val_trace.push_back(f1);
      if (f1 > report.best_val_macro_f1) {
        report.best_val_macro_f1 = f1;
        report.best_iteration = iter;
        best = model.clone();
        have_best = true;
        evals_since_improvement = 0;
      } else {
        ++evals_since_improvement;
      }
    }

    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.trace.push_back(rec);

    if (log) {
      (*log) << iter << '\t' << rec.lr << '\t' << fmt_opt(losses.stance) << '\t' << fmt_opt(losses.subj) << '\t'
             << fmt_opt(losses.obj) << '\t' << fmt_opt(losses.conf_subj) << '\t' << fmt_opt(losses.conf_obj) << '\t'
             << fmt_opt(rec.val_macro_f1) << '\n';
    }

    if (config.patience > 0 && evals_since_improvement >= config.patience) {
      report.stopped_early = true;
      break;
    }
  }

  report.iterations_run = static_cast<int>(report.trace.size());
  if (have_best) copy_params(model, best);
  return report;
}

}  // namespace dan
