#include "dan/model.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dan/errors.hpp"

namespace dan {

std::string group_prefix(ParamGroup g, ViewMode mode) {
  const bool single = mode == ViewMode::Single;
  switch (g) {
    case ParamGroup::EncSubj:
      return single ? "F" : "F_subj";
    case ParamGroup::EncObj:
      return "F_obj";
    case ParamGroup::Gate:
      return "U";
    case ParamGroup::CStance:
      return "C_stance";
    case ParamGroup::CSubj:
      return "C_subj";
    case ParamGroup::CObj:
      return "C_obj";
    case ParamGroup::DSubj:
      return single ? "D" : "D_subj";
    case ParamGroup::DObj:
      return "D_obj";
  }
  return "?";
}

bool DanModel::view_aligned(ViewId v) const {
  switch (spec.view_mode) {
    case ViewMode::Single:
      return v == ViewId::Subj;  // the lone view lives in the subj slot
    case ViewMode::Dual:
      return true;
    case ViewMode::DualSubjOnly:
      return v == ViewId::Subj;
    case ViewMode::DualObjOnly:
      return v == ViewId::Obj;
  }
  return false;
}

bool DanModel::has_examiner(ViewId v) const { return is_adversarial(spec.aligner) && view_aligned(v); }

DanModel DanModel::init(const ModelSpec& spec, std::shared_ptr<EmbeddingTable> table, Rng& rng) {
  if (!table) throw std::invalid_argument("DanModel::init: embedding table required");
  DanModel m;
  m.spec = spec;
  m.embeddings = std::move(table);
  m.d_e = m.embeddings->d_e;
  const int d_h = spec.d_h, d_f = spec.d_f;
  const int examiner_out = spec.aligner == AlignerKind::Wasserstein ? 1 : 2;

  m.enc_subj = BiLSTMParams::init(m.d_e, d_h, rng);
  if (m.has_obj_encoder()) m.enc_obj = BiLSTMParams::init(m.d_e, d_h, rng);
  if (m.has_gate()) {
    std::vector<real_t> w(static_cast<size_t>(d_h) * 2 * d_h);
    for (auto& x : w) x = static_cast<real_t>(rng.uniform(-0.08, 0.08));
    m.gate_W = Tensor({d_h, 2 * d_h}, std::move(w));
    m.gate_b = Tensor({d_h});
  }
  m.c_stance = FFNParams::init(d_h, d_f, 3, rng);
  if (m.has_subj_head()) m.c_subj = FFNParams::init(d_h, d_f, 2, rng);
  if (m.has_obj_head()) m.c_obj = FFNParams::init(d_h, d_f, 2, rng);
  if (m.has_examiner(ViewId::Subj)) m.d_subj = FFNParams::init(d_h, d_f, examiner_out, rng);
  if (m.has_examiner(ViewId::Obj)) m.d_obj = FFNParams::init(d_h, d_f, examiner_out, rng);
  return m;
}

std::vector<ParamGroup> DanModel::groups_present() const {
  std::vector<ParamGroup> gs;
  gs.push_back(ParamGroup::EncSubj);
  if (has_obj_encoder()) gs.push_back(ParamGroup::EncObj);
  if (has_gate()) gs.push_back(ParamGroup::Gate);
  gs.push_back(ParamGroup::CStance);
  if (has_subj_head()) gs.push_back(ParamGroup::CSubj);
  if (has_obj_head()) gs.push_back(ParamGroup::CObj);
  if (has_examiner(ViewId::Subj)) gs.push_back(ParamGroup::DSubj);
  if (has_examiner(ViewId::Obj)) gs.push_back(ParamGroup::DObj);
  return gs;
}

std::vector<ParamGroup> DanModel::examiner_groups() const {
  std::vector<ParamGroup> gs;
  if (has_examiner(ViewId::Subj)) gs.push_back(ParamGroup::DSubj);
  if (has_examiner(ViewId::Obj)) gs.push_back(ParamGroup::DObj);
  return gs;
}

std::vector<ParamGroup> DanModel::min_groups() const {
  std::vector<ParamGroup> gs;
  for (ParamGroup g : groups_present())
    if (g != ParamGroup::DSubj && g != ParamGroup::DObj) gs.push_back(g);
  return gs;
}

std::vector<std::pair<std::string, Tensor>> DanModel::group_params(ParamGroup g) {
  std::vector<std::pair<std::string, Tensor>> out;
  const std::string prefix = group_prefix(g, spec.view_mode);
  auto add_named = [&](std::vector<std::pair<std::string, Tensor>> ps) {
    for (auto& [suffix, t] : ps) out.emplace_back(prefix + "." + suffix, t);
  };
  switch (g) {
    case ParamGroup::EncSubj:
      add_named(enc_subj.named_params());
      break;
    case ParamGroup::EncObj:
      if (has_obj_encoder()) add_named(enc_obj.named_params());
      break;
    case ParamGroup::Gate:
      if (has_gate()) {
        out.emplace_back("U.W_u", gate_W);
        out.emplace_back("U.b_u", gate_b);
      }
      break;
    case ParamGroup::CStance:
      add_named(c_stance.named_params());
      break;
    case ParamGroup::CSubj:
      if (has_subj_head()) add_named(c_subj.named_params());
      break;
    case ParamGroup::CObj:
      if (has_obj_head()) add_named(c_obj.named_params());
      break;
    case ParamGroup::DSubj:
      if (has_examiner(ViewId::Subj)) add_named(d_subj.named_params());
      break;
    case ParamGroup::DObj:
      if (has_examiner(ViewId::Obj)) add_named(d_obj.named_params());
      break;
  }
  return out;
}

std::vector<std::pair<std::string, Tensor>> DanModel::named_params() {
  std::vector<std::pair<std::string, Tensor>> out;
  for (ParamGroup g : groups_present()) {
    auto ps = group_params(g);
    out.insert(out.end(), ps.begin(), ps.end());
  }
  return out;
}

int64_t DanModel::param_count() {
  int64_t n = 0;
  for (auto& [name, t] : named_params()) n += t.size();
  return n;
}

void DanModel::clear_grads() {
  for (auto& [name, t] : named_params()) t.clear_grad();
}

void DanModel::watch_all(Tape& tape) {
  for (auto& [name, t] : named_params()) tape.watch(t);
}

DanModel DanModel::clone() const {
  DanModel copy = *this;  // shares tensor storage so far
  auto deep = [](Tensor& t) {
    if (t.defined()) t = Tensor(t.shape(), t.to_vector());
  };
  auto deep_ffn = [&](FFNParams& f) {
    deep(f.W1);
    deep(f.b1);
    deep(f.W2);
    deep(f.b2);
  };
  auto deep_lstm = [&](BiLSTMParams& l) {
    for (LstmCellParams* c : {&l.fwd, &l.bwd}) {
      deep(c->W_i);
      deep(c->W_f);
      deep(c->W_o);
      deep(c->W_c);
      deep(c->U_i);
      deep(c->U_f);
      deep(c->U_o);
      deep(c->U_c);
      deep(c->b_i);
      deep(c->b_f);
      deep(c->b_o);
      deep(c->b_c);
    }
    deep(l.W_l);
    deep(l.b_l);
  };
  deep_lstm(copy.enc_subj);
  deep_lstm(copy.enc_obj);
  deep_ffn(copy.c_stance);
  deep_ffn(copy.c_subj);
  deep_ffn(copy.c_obj);
  deep_ffn(copy.d_subj);
  deep_ffn(copy.d_obj);
  deep(copy.gate_W);
  deep(copy.gate_b);
  return copy;
}

// ---------------------------------------------------------------------------
// forward paths
// ---------------------------------------------------------------------------

Tensor encode_view(const std::vector<int>& tokens, const DanModel& model, ViewId view, bool train_mode, Rng* rng) {
  const BiLSTMParams* enc = nullptr;
  if (view == ViewId::Subj) {
    enc = &model.enc_subj;
  } else {
    if (!model.has_obj_encoder())
      throw std::invalid_argument("encode_view: no objective encoder in view mode " + to_string(model.spec.view_mode));
    enc = &model.enc_obj;
  }
  DropoutSpec drop{model.spec.dropout_rate, train_mode};
  return encode(tokens, *model.embeddings, *enc, drop, model.spec.pool, rng);
}

std::pair<Tensor, Tensor> encode_views(const std::vector<int>& tokens, const DanModel& model, bool train_mode,
                                       Rng* rng) {
  if (model.spec.view_mode == ViewMode::Single)
    throw std::invalid_argument("encode_views: model is in single-view mode");
  Tensor f_subj = encode_view(tokens, model, ViewId::Subj, train_mode, rng);
  Tensor f_obj = encode_view(tokens, model, ViewId::Obj, train_mode, rng);
  return {f_subj, f_obj};
}

std::pair<Tensor, Tensor> fuse(const Tensor& f_subj, const Tensor& f_obj, const DanModel& model) {
  if (!model.has_gate()) throw std::invalid_argument("fuse: model has no fusion gate (single-view mode)");
  const int d_h = model.spec.d_h;
  if (f_subj.shape() != std::vector<int>{d_h} || f_obj.shape() != std::vector<int>{d_h})
    throw std::invalid_argument("fuse: feature shapes " + shape_str(f_subj.shape()) + " and " +
                                shape_str(f_obj.shape()) + " do not match gate width (" + std::to_string(d_h) + ")");
  Tensor g = sigmoid(add(matmul(model.gate_W, concat(f_subj, f_obj)), model.gate_b));
  Tensor one_minus_g = add(Tensor::full({d_h}, real_t(1)), scalar_mul(g, real_t(-1)));
  Tensor f_dual = add(mul(g, f_subj), mul(one_minus_g, f_obj));
  return {g, f_dual};
}

Tensor stance_feature(const std::vector<int>& tokens, const DanModel& model, bool train_mode, Rng* rng) {
  if (model.spec.view_mode == ViewMode::Single) return encode_view(tokens, model, ViewId::Subj, train_mode, rng);
  auto [f_subj, f_obj] = encode_views(tokens, model, train_mode, rng);
  return fuse(f_subj, f_obj, model).second;
}

Tensor predict_stance(const std::vector<int>& tokens, const DanModel& model) {
  return ffn_forward(stance_feature(tokens, model, /*train_mode=*/false), model.c_stance, FfnOutput::Probabilities);
}

Tensor auxiliary_predict(const Tensor& f, const FFNParams& head) {
  return ffn_forward(f, head, FfnOutput::Probabilities);
}

Tensor examine(const Tensor& f, const DanModel& model, ViewId view) {
  if (!is_adversarial(model.spec.aligner))
    throw ConfigError("examine: no domain examiner under aligner '" + to_string(model.spec.aligner) + "'");
  if (!model.has_examiner(view))
    throw std::invalid_argument("examine: view has no examiner in mode " + to_string(model.spec.view_mode));
  const FFNParams& ex = view == ViewId::Subj ? model.d_subj : model.d_obj;
  if (model.spec.aligner == AlignerKind::Wasserstein) return ffn_forward(f, ex, FfnOutput::Scalar);
  return ffn_forward(f, ex, FfnOutput::Probabilities);
}

int argmax(const Tensor& probs) {
  int best = 0;
  for (int i = 1; i < probs.size(); ++i)
    if (probs.at(i) > probs.at(best)) best = i;
  return best;
}

// ---------------------------------------------------------------------------
// checkpoint io
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kMagic = "DAN-CHECKPOINT 1";
constexpr const char* kPayloadMark = "%%FLOATS%%";

std::string pool_name(PoolKind p) { return p == PoolKind::Mean ? "mean" : "last"; }

PoolKind pool_from_name(const std::string& s) {
  if (s == "mean") return PoolKind::Mean;
  if (s == "last") return PoolKind::LastStep;
  throw DataError("checkpoint: unknown pool kind '" + s + "'");
}

}  // namespace

void save_checkpoint(DanModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);

  auto params = model.named_params();
  std::ostringstream manifest;
  manifest << kMagic << '\n';
  manifest << "param d_h " << model.spec.d_h << '\n';
  manifest << "param d_f " << model.spec.d_f << '\n';
  manifest << "param d_e " << model.d_e << '\n';
  manifest << "param view_mode " << to_string(model.spec.view_mode) << '\n';
  manifest << "param aligner " << to_string(model.spec.aligner) << '\n';
  manifest << "param pool " << pool_name(model.spec.pool) << '\n';
  manifest << "param dropout_rate " << model.spec.dropout_rate << '\n';
  manifest << "param vocab_size " << (model.embeddings ? model.embeddings->vocab_size : 0) << '\n';

  uint64_t offset = 0;
  for (auto& [name, t] : params) {
    manifest << "tensor " << name << ' ' << t.shape().size();
    for (int d : t.shape()) manifest << ' ' << d;
    manifest << ' ' << offset << '\n';
    offset += static_cast<uint64_t>(t.size()) * sizeof(float);
  }
  manifest << kPayloadMark << '\n';
  out << manifest.str();

  for (auto& [name, t] : params) {
    std::vector<float> f32(static_cast<size_t>(t.size()));
    for (int64_t i = 0; i < t.size(); ++i) f32[static_cast<size_t>(i)] = static_cast<float>(t.data()[i]);
    out.write(reinterpret_cast<const char*>(f32.data()), static_cast<std::streamsize>(f32.size() * sizeof(float)));
  }
  if (!out) throw DataError("checkpoint write failed: " + path);
}

DanModel load_checkpoint(const std::string& path, std::shared_ptr<EmbeddingTable> table) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);

  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw DataError("checkpoint: bad magic in " + path);

  ModelSpec spec;
  int d_e = -1, vocab_size = -1;
  struct Entry {
    std::string name;
    std::vector<int> shape;
    uint64_t offset;
  };
  std::vector<Entry> entries;

  while (std::getline(in, line)) {
    if (line == kPayloadMark) break;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "param") {
      std::string key, value;
      ls >> key >> value;
      if (key == "d_h")
        spec.d_h = std::stoi(value);
      else if (key == "d_f")
        spec.d_f = std::stoi(value);
      else if (key == "d_e")
        d_e = std::stoi(value);
      else if (key == "view_mode")
        spec.view_mode = view_mode_from_string(value);
      else if (key == "aligner")
        spec.aligner = aligner_from_string(value);
      else if (key == "pool")
        spec.pool = pool_from_name(value);
      else if (key == "dropout_rate")
        spec.dropout_rate = static_cast<real_t>(std::stod(value));
      else if (key == "vocab_size")
        vocab_size = std::stoi(value);
      else
        throw DataError("checkpoint: unknown hyperparameter '" + key + "'");
    } else if (kind == "tensor") {
      Entry e;
      int rank;
      ls >> e.name >> rank;
      for (int i = 0; i < rank; ++i) {
        int d;
        ls >> d;
        e.shape.push_back(d);
      }
      ls >> e.offset;
      if (!ls) throw DataError("checkpoint: malformed tensor line: " + line);
      entries.push_back(std::move(e));
    } else {
      throw DataError("checkpoint: unexpected manifest line: " + line);
    }
  }
  if (d_e < 0) throw DataError("checkpoint: missing d_e");
  if (!table) throw DataError("load_checkpoint: embedding table required");
  if (table->d_e != d_e)
    throw DataError("checkpoint d_e=" + std::to_string(d_e) + " does not match embedding table d_e=" +
                    std::to_string(table->d_e));
  if (vocab_size >= 0 && table->vocab_size != vocab_size)
    throw DataError("checkpoint vocab_size=" + std::to_string(vocab_size) +
                    " does not match embedding table vocab_size=" + std::to_string(table->vocab_size));

  Rng rng(0);  // values are overwritten below
  DanModel model = DanModel::init(spec, std::move(table), rng);
  auto params = model.named_params();
  if (params.size() != entries.size())
    throw DataError("checkpoint: tensor count " + std::to_string(entries.size()) + " does not match model (" +
                    std::to_string(params.size()) + ")");

  std::streampos payload_start = in.tellg();
  for (size_t i = 0; i < params.size(); ++i) {
    auto& [name, t] = params[i];
    const Entry& e = entries[i];
    if (e.name != name) throw DataError("checkpoint: tensor '" + e.name + "' where '" + name + "' expected");
    if (e.shape != t.shape())
      throw DataError("checkpoint: tensor '" + name + "' has shape " + shape_str(e.shape) + ", expected " +
                      shape_str(t.shape()));
    in.seekg(payload_start + static_cast<std::streamoff>(e.offset));
    std::vector<float> f32(static_cast<size_t>(t.size()));
    in.read(reinterpret_cast<char*>(f32.data()), static_cast<std::streamsize>(f32.size() * sizeof(float)));
    if (!in) throw DataError("checkpoint: truncated payload for tensor '" + name + "'");
    for (int64_t j = 0; j < t.size(); ++j) t.data()[j] = static_cast<real_t>(f32[static_cast<size_t>(j)]);
  }
  return model;
}

}  // namespace dan
