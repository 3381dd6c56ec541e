#include "dan/nn.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dan/errors.hpp"

namespace dan {

Tensor EmbeddingTable::vector_of(int id) const {
  if (id < 0 || id >= vocab_size)
    throw std::invalid_argument("embedding id " + std::to_string(id) + " out of range, vocabulary size " +
                                std::to_string(vocab_size));
  std::vector<real_t> v(vectors.begin() + static_cast<int64_t>(id) * d_e,
                        vectors.begin() + static_cast<int64_t>(id + 1) * d_e);
  return Tensor({d_e}, std::move(v));
}

EmbeddingTable make_embedding_table(const std::vector<std::pair<std::string, std::vector<real_t>>>& entries) {
  if (entries.empty()) throw DataError("embedding table: no entries");
  EmbeddingTable t;
  t.d_e = static_cast<int>(entries[0].second.size());
  t.vocab_size = static_cast<int>(entries.size()) + 1;
  t.vectors.assign(static_cast<size_t>(t.vocab_size) * t.d_e, real_t(0));  // row 0 stays zero (UNK)
  int id = 1;
  for (const auto& [word, vec] : entries) {
    if (static_cast<int>(vec.size()) != t.d_e)
      throw DataError("embedding table: vector width " + std::to_string(vec.size()) + " for '" + word +
                      "' disagrees with d_e=" + std::to_string(t.d_e));
    if (t.index.count(word)) throw DataError("embedding table: duplicate word '" + word + "'");
    std::copy(vec.begin(), vec.end(), t.vectors.begin() + static_cast<int64_t>(id) * t.d_e);
    t.index[word] = id;
    ++id;
  }
  return t;
}

EmbeddingTable load_embedding_table(const std::string& path, const std::vector<std::string>& vocab) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file: " + path);

  std::unordered_map<std::string, std::vector<real_t>> file_vecs;
  std::string line;
  int line_no = 0;
  int d_e = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    std::vector<real_t> vec;
    double v;
    while (ls >> v) vec.push_back(static_cast<real_t>(v));
    if (!ls.eof())
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed vector component");
    if (d_e < 0) {
      if (vec.empty()) throw DataError(path + ":" + std::to_string(line_no) + ": no vector components");
      d_e = static_cast<int>(vec.size());
    } else if (static_cast<int>(vec.size()) != d_e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": vector width " + std::to_string(vec.size()) +
                      " disagrees with d_e=" + std::to_string(d_e));
    }
    file_vecs[word] = std::move(vec);
  }
  if (d_e < 0) throw DataError("embedding file is empty: " + path);

  // vocabulary order fixes the id assignment; tokens without a pretrained
  // vector fall back to the UNK row
  std::vector<std::pair<std::string, std::vector<real_t>>> entries;
  entries.reserve(vocab.size());
  for (const auto& tok : vocab) {
    auto it = file_vecs.find(tok);
    if (it != file_vecs.end()) entries.emplace_back(tok, it->second);
  }
  if (entries.empty())
    throw DataError("embedding file " + path + " covers none of the " + std::to_string(vocab.size()) +
                    " vocabulary tokens");
  return make_embedding_table(entries);
}

void write_embedding_file(const std::string& path, const EmbeddingTable& table) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write embedding file: " + path);
  // stable order: by id
  std::vector<const std::string*> by_id(static_cast<size_t>(table.vocab_size), nullptr);
  for (const auto& [tok, id] : table.index) by_id[static_cast<size_t>(id)] = &tok;
  out.precision(17);
  for (int id = 1; id < table.vocab_size; ++id) {
    if (!by_id[id]) continue;
    out << *by_id[id];
    for (int j = 0; j < table.d_e; ++j) out << ' ' << table.vectors[static_cast<int64_t>(id) * table.d_e + j];
    out << '\n';
  }
}

namespace {

Tensor uniform_matrix(int rows, int cols, Rng& rng) {
  std::vector<real_t> v(static_cast<size_t>(rows) * cols);
  for (auto& x : v) x = static_cast<real_t>(rng.uniform(-0.08, 0.08));
  return Tensor({rows, cols}, std::move(v));
}

}  // namespace

BiLSTMParams BiLSTMParams::init(int d_e, int d_h, Rng& rng) {
  BiLSTMParams p;
  p.d_e = d_e;
  p.d_h = d_h;
  auto cell = [&](LstmCellParams& c) {
    c.W_i = uniform_matrix(d_h, d_e, rng);
    c.W_f = uniform_matrix(d_h, d_e, rng);
    c.W_o = uniform_matrix(d_h, d_e, rng);
    c.W_c = uniform_matrix(d_h, d_e, rng);
    c.U_i = uniform_matrix(d_h, d_h, rng);
    c.U_f = uniform_matrix(d_h, d_h, rng);
    c.U_o = uniform_matrix(d_h, d_h, rng);
    c.U_c = uniform_matrix(d_h, d_h, rng);
    c.b_i = Tensor({d_h});
    c.b_f = Tensor({d_h});
    c.b_o = Tensor({d_h});
    c.b_c = Tensor({d_h});
  };
  cell(p.fwd);
  cell(p.bwd);
  p.W_l = uniform_matrix(d_h, 2 * d_h, rng);
  p.b_l = Tensor({d_h});
  return p;
}

std::vector<std::pair<std::string, Tensor>> BiLSTMParams::named_params() {
  std::vector<std::pair<std::string, Tensor>> out;
  auto cell = [&](const char* dir, LstmCellParams& c) {
    out.emplace_back(std::string(dir) + ".W_i", c.W_i);
    out.emplace_back(std::string(dir) + ".W_f", c.W_f);
    out.emplace_back(std::string(dir) + ".W_o", c.W_o);
    out.emplace_back(std::string(dir) + ".W_c", c.W_c);
    out.emplace_back(std::string(dir) + ".U_i", c.U_i);
    out.emplace_back(std::string(dir) + ".U_f", c.U_f);
    out.emplace_back(std::string(dir) + ".U_o", c.U_o);
    out.emplace_back(std::string(dir) + ".U_c", c.U_c);
    out.emplace_back(std::string(dir) + ".b_i", c.b_i);
    out.emplace_back(std::string(dir) + ".b_f", c.b_f);
    out.emplace_back(std::string(dir) + ".b_o", c.b_o);
    out.emplace_back(std::string(dir) + ".b_c", c.b_c);
  };
  cell("fwd", fwd);
  cell("bwd", bwd);
  out.emplace_back("W_l", W_l);
  out.emplace_back("b_l", b_l);
  return out;
}

FFNParams FFNParams::init(int in, int hidden, int out, Rng& rng) {
  FFNParams p;
  p.in = in;
  p.hidden = hidden;
  p.out = out;
  p.W1 = uniform_matrix(hidden, in, rng);
  p.b1 = Tensor({hidden});
  p.W2 = uniform_matrix(out, hidden, rng);
  p.b2 = Tensor({out});
  return p;
}

std::vector<std::pair<std::string, Tensor>> FFNParams::named_params() {
  return {{"W1", W1}, {"b1", b1}, {"W2", W2}, {"b2", b2}};
}

std::vector<Tensor> embed(const std::vector<int>& tokens, const EmbeddingTable& table) {
  std::vector<Tensor> out;
  out.reserve(tokens.size());
  for (int id : tokens) out.push_back(table.vector_of(id));
  return out;
}

namespace {

// one LSTM step: returns (h, c)
std::pair<Tensor, Tensor> lstm_step(const LstmCellParams& p, const Tensor& x, const Tensor& h_prev,
                                    const Tensor& c_prev) {
  Tensor i = sigmoid(add(add(matmul(p.W_i, x), matmul(p.U_i, h_prev)), p.b_i));
  Tensor f = sigmoid(add(add(matmul(p.W_f, x), matmul(p.U_f, h_prev)), p.b_f));
  Tensor o = sigmoid(add(add(matmul(p.W_o, x), matmul(p.U_o, h_prev)), p.b_o));
  Tensor c_hat = tanh(add(add(matmul(p.W_c, x), matmul(p.U_c, h_prev)), p.b_c));
  Tensor c = add(mul(f, c_prev), mul(i, c_hat));
  Tensor h = mul(o, tanh(c));
  return {h, c};
}

}  // namespace

Tensor encode(const std::vector<int>& tokens, const EmbeddingTable& table, const BiLSTMParams& lstm,
              const DropoutSpec& dropout, PoolKind pool, Rng* rng) {
  if (tokens.empty()) throw std::invalid_argument("encode: empty token sequence");
  const int steps = static_cast<int>(tokens.size());
  std::vector<Tensor> xs = embed(tokens, table);

  std::vector<Tensor> h_fwd(steps), h_bwd(steps);
  Tensor h = Tensor({lstm.d_h}), c = Tensor({lstm.d_h});
  for (int t = 0; t < steps; ++t) {
    auto [hn, cn] = lstm_step(lstm.fwd, xs[t], h, c);
    h_fwd[t] = hn;
    h = hn;
    c = cn;
  }
  h = Tensor({lstm.d_h});
  c = Tensor({lstm.d_h});
  for (int t = steps - 1; t >= 0; --t) {
    auto [hn, cn] = lstm_step(lstm.bwd, xs[t], h, c);
    h_bwd[t] = hn;
    h = hn;
    c = cn;
  }

  // project each 2*d_h step state back to d_h, then pool
  Tensor pooled;
  if (pool == PoolKind::LastStep) {
    pooled = add(matmul(lstm.W_l, concat(h_fwd[steps - 1], h_bwd[steps - 1])), lstm.b_l);
  } else {
    for (int t = 0; t < steps; ++t) {
      Tensor proj = add(matmul(lstm.W_l, concat(h_fwd[t], h_bwd[t])), lstm.b_l);
      pooled = t == 0 ? proj : add(pooled, proj);
    }
    pooled = scalar_mul(pooled, real_t(1) / static_cast<real_t>(steps));
  }

  if (dropout.active && dropout.rate > 0) {
    if (!rng) throw std::invalid_argument("encode: active dropout needs an rng");
    pooled = apply_dropout(pooled, dropout, *rng);
  }
  return pooled;
}

Tensor apply_dropout(const Tensor& f, const DropoutSpec& spec, Rng& rng) {
  if (!spec.active || spec.rate <= 0) return f;
  if (spec.rate >= 1) throw std::invalid_argument("dropout rate must be in [0,1)");
  const real_t keep = real_t(1) - static_cast<real_t>(spec.rate);
  std::vector<real_t> mask(static_cast<size_t>(f.size()));
  for (auto& m : mask) m = rng.uniform() < spec.rate ? real_t(0) : real_t(1) / keep;
  return mul(f, Tensor(f.shape(), std::move(mask)));
}

Tensor ffn_forward(const Tensor& f, const FFNParams& params, FfnOutput output) {
  if (f.shape().size() != 1 || f.shape()[0] != params.in)
    throw std::invalid_argument("ffn_forward: input shape " + shape_str(f.shape()) + " does not match expected (" +
                                std::to_string(params.in) + ")");
  Tensor hidden = relu(add(matmul(params.W1, f), params.b1));
  Tensor logits = add(matmul(params.W2, hidden), params.b2);
  switch (output) {
    case FfnOutput::Probabilities:
      return softmax(logits);
    case FfnOutput::Logits:
      return logits;
    case FfnOutput::Scalar:
      if (params.out != 1)
        throw std::invalid_argument("ffn_forward: scalar output needs width 1, head has width " +
                                    std::to_string(params.out));
      return logits;
  }
  throw std::invalid_argument("ffn_forward: unknown output mode");
}

}  // namespace dan
