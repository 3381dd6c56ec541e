#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dan/modes.hpp"
#include "dan/nn.hpp"
#include "dan/tensor.hpp"

namespace dan {

enum class ViewId { Subj, Obj };

enum class ParamGroup { EncSubj, EncObj, Gate, CStance, CSubj, CObj, DSubj, DObj };

std::string group_prefix(ParamGroup g, ViewMode mode);

struct ModelSpec {
  int d_h = 128;
  int d_f = 128;
  ViewMode view_mode = ViewMode::Dual;
  AlignerKind aligner = AlignerKind::HAdversarial;
  PoolKind pool = PoolKind::Mean;
  real_t dropout_rate = 0.1;
};

/// The full DAN parameter set: per-view encoders, classifier heads, domain
/// examiners and the fusion gate, configurable down to every single-view
/// baseline. The embedding table is shared by both views and fixed.
struct DanModel {
  ModelSpec spec;
  int d_e = 0;
  std::shared_ptr<EmbeddingTable> embeddings;

  BiLSTMParams enc_subj;  // the only encoder in single mode
  BiLSTMParams enc_obj;
  FFNParams c_stance;  // 3-way
  FFNParams c_subj;    // 2-way
  FFNParams c_obj;     // 2-way
  FFNParams d_subj;    // H: 2-way, W: scalar; the only examiner in single mode
  FFNParams d_obj;
  Tensor gate_W;  // d_h x 2*d_h
  Tensor gate_b;  // d_h

  static DanModel init(const ModelSpec& spec, std::shared_ptr<EmbeddingTable> table, Rng& rng);

  bool has_obj_encoder() const { return spec.view_mode != ViewMode::Single; }
  bool has_gate() const { return spec.view_mode != ViewMode::Single; }
  bool has_subj_head() const {
    return spec.view_mode == ViewMode::Dual || spec.view_mode == ViewMode::DualSubjOnly;
  }
  bool has_obj_head() const {
    return spec.view_mode == ViewMode::Dual || spec.view_mode == ViewMode::DualObjOnly;
  }
  /// whether this view participates in domain alignment under the mode
  bool view_aligned(ViewId v) const;
  bool has_examiner(ViewId v) const;

  /// all parameters, deterministic order, names prefixed by group
  std::vector<std::pair<std::string, Tensor>> named_params();
  std::vector<std::pair<std::string, Tensor>> group_params(ParamGroup g);
  std::vector<ParamGroup> groups_present() const;
  std::vector<ParamGroup> examiner_groups() const;
  std::vector<ParamGroup> min_groups() const;  // everything but the examiners

  int64_t param_count();
  void clear_grads();
  void watch_all(Tape& tape);

  /// deep copy (fresh storage for every parameter)
  DanModel clone() const;
};

/// Both view features of one utterance: two independent encoder passes, no
/// parameter sharing. Requires a dual-view mode.
std::pair<Tensor, Tensor> encode_views(const std::vector<int>& tokens, const DanModel& model, bool train_mode = false,
                                       Rng* rng = nullptr);

/// One view's feature (works in every mode; single mode only has Subj).
Tensor encode_view(const std::vector<int>& tokens, const DanModel& model, ViewId view, bool train_mode = false,
                   Rng* rng = nullptr);

/// Gated fusion: g = sigmoid(W_u [f_subj; f_obj] + b_u),
/// f_dual = g * f_subj + (1 - g) * f_obj. Returns (g, f_dual).
std::pair<Tensor, Tensor> fuse(const Tensor& f_subj, const Tensor& f_obj, const DanModel& model);

/// The feature consumed by the stance head: fused in dual modes, the lone
/// encoder output in single mode.
Tensor stance_feature(const std::vector<int>& tokens, const DanModel& model, bool train_mode = false,
                      Rng* rng = nullptr);

/// 3-way stance probabilities over {favour, against, neutral} (inference
/// path: dropout inactive).
Tensor predict_stance(const std::vector<int>& tokens, const DanModel& model);

/// 2-way auxiliary prediction from the matching view feature.
Tensor auxiliary_predict(const Tensor& f, const FFNParams& head);

/// Domain score of a view feature: 2-way probabilities (component 0 =
/// source probability) for the H variant, an unbounded scalar for the W
/// variant. Rejected when no adversarial aligner is configured.
Tensor examine(const Tensor& f, const DanModel& model, ViewId view);

/// argmax with ties broken toward the lowest index
int argmax(const Tensor& probs);

/// Checkpoint: text manifest (hyperparameters, tensor names, shapes, byte
/// offsets) followed by raw little-endian float32 arrays in manifest order.
void save_checkpoint(DanModel& model, const std::string& path);
/// Rebuilds the model from a checkpoint; the embedding table is supplied by
/// the caller (it is input data, not a trained parameter).
DanModel load_checkpoint(const std::string& path, std::shared_ptr<EmbeddingTable> table);

}  // namespace dan
