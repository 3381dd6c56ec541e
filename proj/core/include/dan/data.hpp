#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dan/modes.hpp"
#include "dan/nn.hpp"
#include "dan/rng.hpp"

namespace dan {

enum class Stance { Favour = 0, Against = 1, Neutral = 2 };
constexpr int kNumStanceClasses = 3;

std::string stance_name(Stance s);
std::optional<Stance> stance_from_string(const std::string& s);  // nullopt for UNKNOWN

/// One utterance. token_ids are filled once an embedding table exists.
struct Example {
  std::string id;
  std::string topic;
  std::string text;
  std::vector<std::string> tokens;
  std::vector<int> token_ids;
  std::optional<Stance> stance;
  std::optional<int> silver_subj;  // 0/1
  std::optional<int> silver_obj;   // 0/1
  Domain domain = Domain::Source;
};

struct Corpus {
  std::vector<Example> examples;
  std::string topic;
  Domain domain = Domain::Source;

  size_t size() const { return examples.size(); }
  /// counts indexed by stance value, plus [3] for unlabeled
  std::array<int, 4> label_histogram() const;
};

/// Lowercased tokens split on whitespace and punctuation boundaries.
/// #hashtags and @mentions stay single tokens; URLs collapse to "<url>".
std::vector<std::string> tokenize(const std::string& text);

/// Tab-separated `id  topic  text  stance` with a header row. The stance
/// column may be UNKNOWN (no label). Fails atomically naming the first
/// offending line.
Corpus load_corpus(const std::string& path, Domain domain_tag);
void write_corpus_tsv(const std::string& path, const Corpus& corpus);

/// union of source and target tokens, deterministic (sorted) order
std::vector<std::string> build_vocabulary(const std::vector<const Corpus*>& corpora);

/// resolve token ids against the table (UNK for unindexed tokens)
void assign_token_ids(Corpus& corpus, const EmbeddingTable& table);

// ---------------------------------------------------------------------------
// silver subjectivity/objectivity labels
// ---------------------------------------------------------------------------

struct LabeledSentence {
  std::string label;  // "subj" or "obj"
  std::string text;
};

/// `label(subj|obj)<TAB>text` per line
std::vector<LabeledSentence> load_subjectivity_corpus(const std::string& path);

/// Bag-of-words logistic model: one weight per token plus a bias. label()
/// is 1 iff the probability reaches 0.5.
struct SilverLabeler {
  std::unordered_map<std::string, real_t> weights;
  real_t bias = 0;

  real_t probability(const std::vector<std::string>& tokens) const;
  int label(const std::vector<std::string>& tokens) const { return probability(tokens) >= 0.5 ? 1 : 0; }
};

/// Full-batch gradient descent on the logistic loss until the loss change
/// drops below `tol` or `max_epochs` epochs.
SilverLabeler train_silver_labeler(const std::vector<LabeledSentence>& corpus, const std::string& positive_label,
                                   int max_epochs = 200, real_t tol = 1e-6, real_t lr = 0.5);

/// Stamp silver_subj/silver_obj on every example. Never reads stance labels.
void assign_silver_labels(Corpus& corpus, const SilverLabeler& subj_labeler, const SilverLabeler& obj_labeler);

/// `id<TAB>subj(0|1)<TAB>obj(0|1)`; lets externally produced labels replace
/// the internal labeler
void write_silver_file(const std::string& path, const Corpus& corpus);
void apply_silver_file(Corpus& corpus, const std::string& path);

// ---------------------------------------------------------------------------
// synthetic two-domain task
// ---------------------------------------------------------------------------

/// Desk-scale generator: stance is determined by planted subjective and/or
/// objective cue tokens; the target domain swaps a `shift_rate` fraction of
/// surface tokens for domain-specific twins whose embeddings sit near (for
/// fillers) or displaced from (for cues) the originals.
struct SynthSpec {
  int n_source = 2000;
  int n_target = 2000;
  double shift_rate = 0.6;
  int d_e = 16;
  int n_filler = 40;
  int cues_per_class_subj = 3;
  int cues_per_class_obj = 3;
  int seq_len_min = 5;
  int seq_len_max = 10;
  int cue_count_min = 1;
  int cue_count_max = 2;
  double p_subj_only = 0.35;
  double p_obj_only = 0.35;  // remainder carries both cue families
  double filler_shift_mag = 0.05;
  double subj_shift_mag = 2.0;
  double obj_shift_mag = 0.8;
  uint64_t seed = 1;
};

struct SyntheticData {
  Corpus source;                     // stance + silver labels set
  Corpus target;                     // stance absent, silver labels set
  std::vector<Stance> target_gold;   // held-out target labels, aligned with target.examples
  std::shared_ptr<EmbeddingTable> table;
};

SyntheticData gen_synthetic(const SynthSpec& spec);

// ---------------------------------------------------------------------------
// batch sampling
// ---------------------------------------------------------------------------

/// m example indices per domain, uniformly with per-epoch reshuffling; a
/// pure function of (seed, iteration). iteration is 0-based. When m exceeds
/// the corpus size the batch is drawn with replacement (warned once).
struct BatchPair {
  std::vector<int> source;  // indices into the source corpus
  std::vector<int> target;
};

BatchPair sample_batches(const Corpus& source, const Corpus& target, int m, uint64_t seed, int iteration);

/// Deterministic validation carve-out: returns (train, val) built from the
/// source corpus, val_fraction of examples (at least 1 when possible) chosen
/// by a seed-keyed shuffle.
std::pair<Corpus, Corpus> split_validation(const Corpus& source, double val_fraction, uint64_t seed);

}  // namespace dan
