#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "dan/rng.hpp"
#include "dan/tensor.hpp"

namespace dan {

/// Fixed word-vector table. Row 0 is the reserved zero-initialized UNK slot;
/// out-of-vocabulary tokens map to it. Vectors are stored one word per row
/// (V x d_e) and looked up by id.
struct EmbeddingTable {
  static constexpr int kUnkId = 0;
  static constexpr const char* kUnkToken = "<unk>";

  int d_e = 0;
  int vocab_size = 0;                            // includes the UNK row
  std::vector<real_t> vectors;                   // vocab_size x d_e, row-major
  std::unordered_map<std::string, int> index;    // token -> id (>= 1)
  bool trainable = false;

  int id_of(const std::string& token) const {
    auto it = index.find(token);
    return it == index.end() ? kUnkId : it->second;
  }

  /// lookup by id; ids >= vocab_size are rejected
  Tensor vector_of(int id) const;
};

/// Build a table over `vocab` using vectors from a whitespace-separated text
/// embedding file (`word v1 ... v_de` per line). Vocabulary tokens absent
/// from the file keep the UNK id. Lines whose width disagrees with the first
/// line are rejected with their line number.
EmbeddingTable load_embedding_table(const std::string& path, const std::vector<std::string>& vocab);

/// Assemble a table directly from in-memory (token, vector) pairs.
EmbeddingTable make_embedding_table(const std::vector<std::pair<std::string, std::vector<real_t>>>& entries);

void write_embedding_file(const std::string& path, const EmbeddingTable& table);

/// One LSTM direction: gate weights over the input, recurrent weights over
/// the previous hidden state, and biases, for the input/forget/output gates
/// and the candidate cell.
struct LstmCellParams {
  Tensor W_i, W_f, W_o, W_c;  // d_h x d_e
  Tensor U_i, U_f, U_o, U_c;  // d_h x d_h
  Tensor b_i, b_f, b_o, b_c;  // d_h
};

enum class PoolKind { Mean, LastStep };

/// Bidirectional LSTM encoder parameters plus the linear projection that
/// maps each 2*d_h step state back to d_h.
struct BiLSTMParams {
  int d_e = 0;
  int d_h = 0;
  LstmCellParams fwd;
  LstmCellParams bwd;
  Tensor W_l;  // d_h x 2*d_h
  Tensor b_l;  // d_h

  static BiLSTMParams init(int d_e, int d_h, Rng& rng);
  /// parameters in a stable order as (suffix, tensor) pairs
  std::vector<std::pair<std::string, Tensor>> named_params();
};

enum class FfnOutput { Probabilities, Logits, Scalar };

/// Two-layer feed-forward head with ReLU hidden activation.
struct FFNParams {
  int in = 0, hidden = 0, out = 0;
  Tensor W1, b1;  // hidden x in, hidden
  Tensor W2, b2;  // out x hidden, out

  static FFNParams init(int in, int hidden, int out, Rng& rng);
  std::vector<std::pair<std::string, Tensor>> named_params();
};

struct DropoutSpec {
  real_t rate = 0.1;
  bool active = false;  // identity at inference
};

/// token ids -> word vectors (constants; the table is fixed during training)
std::vector<Tensor> embed(const std::vector<int>& tokens, const EmbeddingTable& table);

/// Full encoder: embed, run both LSTM directions, project each step to d_h,
/// pool into one d_h feature, then dropout (training only). `rng` is only
/// consulted when dropout is active.
Tensor encode(const std::vector<int>& tokens, const EmbeddingTable& table, const BiLSTMParams& lstm,
              const DropoutSpec& dropout, PoolKind pool = PoolKind::Mean, Rng* rng = nullptr);

Tensor ffn_forward(const Tensor& f, const FFNParams& params, FfnOutput output);

/// inverted dropout on a vector; identity when inactive
Tensor apply_dropout(const Tensor& f, const DropoutSpec& spec, Rng& rng);

}  // namespace dan
