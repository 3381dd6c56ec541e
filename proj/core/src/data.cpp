#include "dan/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "dan/errors.hpp"

namespace dan {

std::string stance_name(Stance s) {
  switch (s) {
    case Stance::Favour:
      return "favour";
    case Stance::Against:
      return "against";
    case Stance::Neutral:
      return "neutral";
  }
  return "?";
}

std::optional<Stance> stance_from_string(const std::string& s) {
  std::string l;
  l.reserve(s.size());
  for (char c : s) l.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (l == "favour" || l == "favor") return Stance::Favour;
  if (l == "against") return Stance::Against;
  if (l == "neutral" || l == "none") return Stance::Neutral;
  if (l == "unknown") return std::nullopt;
  throw DataError("unknown stance label '" + s + "'");
}

std::array<int, 4> Corpus::label_histogram() const {
  std::array<int, 4> h{0, 0, 0, 0};
  for (const auto& e : examples) {
    if (e.stance)
      ++h[static_cast<int>(*e.stance)];
    else
      ++h[3];
  }
  return h;
}

// ---------------------------------------------------------------------------
// tokenizer
// ---------------------------------------------------------------------------

namespace {

bool is_word_char(unsigned char c) {
  // multi-byte UTF-8 continuation/lead bytes count as word characters
  return std::isalnum(c) || c == '_' || c >= 0x80;
}

bool is_url_chunk(const std::string& chunk) {
  auto starts = [&](const char* p) {
    size_t n = std::strlen(p);
    if (chunk.size() < n) return false;
    for (size_t i = 0; i < n; ++i)
      if (std::tolower(static_cast<unsigned char>(chunk[i])) != p[i]) return false;
    return true;
  };
  return starts("http://") || starts("https://") || starts("www.");
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string chunk;
  while (ss >> chunk) {
    if (is_url_chunk(chunk)) {
      out.push_back("<url>");
      continue;
    }
    size_t i = 0;
    while (i < chunk.size()) {
      unsigned char c = static_cast<unsigned char>(chunk[i]);
      if ((c == '#' || c == '@') && i + 1 < chunk.size() && is_word_char(static_cast<unsigned char>(chunk[i + 1]))) {
        // hashtags and mentions stay one token
        size_t j = i + 1;
        while (j < chunk.size() && is_word_char(static_cast<unsigned char>(chunk[j]))) ++j;
        std::string tok = chunk.substr(i, j - i);
        for (char& ch : tok) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        out.push_back(std::move(tok));
        i = j;
      } else if (is_word_char(c)) {
        size_t j = i;
        while (j < chunk.size() && is_word_char(static_cast<unsigned char>(chunk[j]))) ++j;
        std::string tok = chunk.substr(i, j - i);
        for (char& ch : tok) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        out.push_back(std::move(tok));
        i = j;
      } else {
        out.push_back(std::string(1, static_cast<char>(c)));
        ++i;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// corpus io
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cols;
  size_t start = 0;
  while (true) {
    size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      cols.push_back(line.substr(start));
      break;
    }
    cols.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cols;
}

}  // namespace

Corpus load_corpus(const std::string& path, Domain domain_tag) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file, expected a header row");
  if (split_tabs(line).size() != 4)
    throw DataError(path + ":1: header must have 4 tab-separated columns (id, topic, text, stance)");

  Corpus corpus;
  corpus.domain = domain_tag;
  std::set<std::string> seen_ids;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 4)
      throw DataError(path + ":" + std::to_string(line_no) + ": expected 4 columns, got " +
                      std::to_string(cols.size()));
    Example e;
    e.id = cols[0];
    e.topic = cols[1];
    e.text = cols[2];
    try {
      e.stance = stance_from_string(cols[3]);
    } catch (const DataError& err) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + err.what());
    }
    e.tokens = tokenize(e.text);
    e.domain = domain_tag;
    if (!seen_ids.insert(e.id).second)
      throw DataError(path + ":" + std::to_string(line_no) + ": duplicate example id '" + e.id + "'");
    corpus.examples.push_back(std::move(e));
  }
  if (!corpus.examples.empty()) {
    corpus.topic = corpus.examples.front().topic;
    for (const auto& e : corpus.examples)
      if (e.topic != corpus.topic) {
        corpus.topic = "mixed";
        break;
      }
  }
  return corpus;
}

void write_corpus_tsv(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write corpus: " + path);
  out << "id\ttopic\ttext\tstance\n";
  for (const auto& e : corpus.examples) {
    out << e.id << '\t' << e.topic << '\t' << e.text << '\t' << (e.stance ? stance_name(*e.stance) : "UNKNOWN")
        << '\n';
  }
}

std::vector<std::string> build_vocabulary(const std::vector<const Corpus*>& corpora) {
  std::set<std::string> vocab;
  for (const Corpus* c : corpora)
    for (const auto& e : c->examples)
      for (const auto& t : e.tokens) vocab.insert(t);
  return std::vector<std::string>(vocab.begin(), vocab.end());
}

void assign_token_ids(Corpus& corpus, const EmbeddingTable& table) {
  for (auto& e : corpus.examples) {
    e.token_ids.clear();
    e.token_ids.reserve(e.tokens.size());
    for (const auto& t : e.tokens) e.token_ids.push_back(table.id_of(t));
  }
}

// ---------------------------------------------------------------------------
// silver labels
// ---------------------------------------------------------------------------

std::vector<LabeledSentence> load_subjectivity_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open subjectivity corpus: " + path);
  std::vector<LabeledSentence> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 2)
      throw DataError(path + ":" + std::to_string(line_no) + ": expected `label<TAB>text`, got " +
                      std::to_string(cols.size()) + " columns");
    if (cols[0] != "subj" && cols[0] != "obj")
      throw DataError(path + ":" + std::to_string(line_no) + ": label must be subj or obj, got '" + cols[0] + "'");
    out.push_back({cols[0], cols[1]});
  }
  return out;
}

real_t SilverLabeler::probability(const std::vector<std::string>& tokens) const {
  real_t z = bias;
  for (const auto& t : tokens) {
    auto it = weights.find(t);
    if (it != weights.end()) z += it->second;
  }
  if (z >= 0) return real_t(1) / (real_t(1) + std::exp(-z));
  real_t e = std::exp(z);
  return e / (real_t(1) + e);
}

SilverLabeler train_silver_labeler(const std::vector<LabeledSentence>& corpus, const std::string& positive_label,
                                   int max_epochs, real_t tol, real_t lr) {
  if (corpus.empty()) throw DataError("train_silver_labeler: empty corpus");
  int n_pos = 0, n_neg = 0;
  std::vector<std::vector<std::string>> token_lists;
  std::vector<int> ys;  // +1 / -1
  token_lists.reserve(corpus.size());
  for (const auto& s : corpus) {
    token_lists.push_back(tokenize(s.text));
    int y = s.label == positive_label ? 1 : -1;
    ys.push_back(y);
    (y > 0 ? n_pos : n_neg)++;
  }
  if (n_pos == 0 || n_neg == 0)
    throw DataError("train_silver_labeler: need both classes, got " + std::to_string(n_pos) + " positive / " +
                    std::to_string(n_neg) + " negative");

  // bag-of-words counts per example
  std::vector<std::unordered_map<std::string, int>> bows(corpus.size());
  for (size_t i = 0; i < token_lists.size(); ++i)
    for (const auto& t : token_lists[i]) ++bows[i][t];

  SilverLabeler model;
  const real_t inv_n = real_t(1) / static_cast<real_t>(corpus.size());
  real_t prev_loss = -1;
  for (int epoch = 0; epoch < max_epochs; ++epoch) {
    std::unordered_map<std::string, real_t> grad_w;
    real_t grad_b = 0;
    real_t loss = 0;
    for (size_t i = 0; i < bows.size(); ++i) {
      real_t z = model.bias;
      for (const auto& [tok, cnt] : bows[i]) {
        auto it = model.weights.find(tok);
        if (it != model.weights.end()) z += it->second * cnt;
      }
      real_t y = static_cast<real_t>(ys[i]);
      real_t m = y * z;
      // log(1 + exp(-m)), computed stably
      loss += m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
      // d/dz = -y * sigmoid(-m)
      real_t s = m > 0 ? std::exp(-m) / (1 + std::exp(-m)) : real_t(1) / (1 + std::exp(m));
      real_t dz = -y * s;
      grad_b += dz;
      for (const auto& [tok, cnt] : bows[i]) grad_w[tok] += dz * cnt;
    }
    loss *= inv_n;
    model.bias -= lr * grad_b * inv_n;
    for (const auto& [tok, g] : grad_w) model.weights[tok] -= lr * g * inv_n;
    if (prev_loss >= 0 && std::abs(prev_loss - loss) < tol) break;
    prev_loss = loss;
  }
  return model;
}

void assign_silver_labels(Corpus& corpus, const SilverLabeler& subj_labeler, const SilverLabeler& obj_labeler) {
  for (auto& e : corpus.examples) {
    e.silver_subj = subj_labeler.label(e.tokens);
    e.silver_obj = obj_labeler.label(e.tokens);
  }
}

void write_silver_file(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write silver-label file: " + path);
  for (const auto& e : corpus.examples) {
    if (!e.silver_subj || !e.silver_obj)
      throw DataError("write_silver_file: example '" + e.id + "' has no silver labels");
    out << e.id << '\t' << *e.silver_subj << '\t' << *e.silver_obj << '\n';
  }
}

void apply_silver_file(Corpus& corpus, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open silver-label file: " + path);
  std::unordered_map<std::string, std::pair<int, int>> labels;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 3)
      throw DataError(path + ":" + std::to_string(line_no) + ": expected `id<TAB>subj<TAB>obj`");
    auto parse01 = [&](const std::string& s) {
      if (s == "0") return 0;
      if (s == "1") return 1;
      throw DataError(path + ":" + std::to_string(line_no) + ": silver label must be 0 or 1, got '" + s + "'");
    };
    labels[cols[0]] = {parse01(cols[1]), parse01(cols[2])};
  }
  for (auto& e : corpus.examples) {
    auto it = labels.find(e.id);
    if (it == labels.end()) throw DataError(path + ": no silver labels for example '" + e.id + "'");
    e.silver_subj = it->second.first;
    e.silver_obj = it->second.second;
  }
}

// ---------------------------------------------------------------------------
// synthetic generator
// ---------------------------------------------------------------------------

namespace {

std::vector<real_t> random_vec(int d, double scale, Rng& rng) {
  std::vector<real_t> v(static_cast<size_t>(d));
  for (auto& x : v) x = static_cast<real_t>(rng.uniform(-scale, scale));
  return v;
}

std::vector<real_t> displaced(const std::vector<real_t>& base, double mag, Rng& rng) {
  // base + mag * random unit direction
  std::vector<real_t> dir(base.size());
  double norm = 0;
  for (auto& x : dir) {
    x = static_cast<real_t>(rng.normal());
    norm += static_cast<double>(x) * x;
  }
  norm = std::sqrt(std::max(norm, 1e-12));
  std::vector<real_t> out(base.size());
  for (size_t i = 0; i < base.size(); ++i) out[i] = base[i] + static_cast<real_t>(mag * dir[i] / norm);
  return out;
}

}  // namespace

SyntheticData gen_synthetic(const SynthSpec& spec) {
  if (spec.n_source < 1 || spec.n_target < 1) throw ConfigError("gen_synthetic: corpus sizes must be >= 1");
  if (spec.shift_rate < 0 || spec.shift_rate > 1)
    throw ConfigError("gen_synthetic: shift rate must lie in [0,1], got " + std::to_string(spec.shift_rate));
  if (spec.seq_len_min < spec.cue_count_max || spec.seq_len_min > spec.seq_len_max)
    throw ConfigError("gen_synthetic: inconsistent sequence length bounds");

  Rng rng = Rng::derive(spec.seed, 0xD0D0);

  // token inventories; "zz" prefixes mark the target-domain twins
  std::vector<std::string> fillers;
  for (int i = 0; i < spec.n_filler; ++i) fillers.push_back("fill" + std::to_string(i));
  const char* class_tag[3] = {"fav", "agn", "neu"};
  std::vector<std::string> subj_cues[3], obj_cues[3];
  for (int c = 0; c < 3; ++c) {
    for (int k = 0; k < spec.cues_per_class_subj; ++k)
      subj_cues[c].push_back(std::string("sub") + class_tag[c] + std::to_string(k));
    for (int k = 0; k < spec.cues_per_class_obj; ++k)
      obj_cues[c].push_back(std::string("obj") + class_tag[c] + std::to_string(k));
  }

  // embeddings: base vector per token, twin displaced per token kind
  std::vector<std::pair<std::string, std::vector<real_t>>> entries;
  auto add_pair = [&](const std::string& tok, double twin_mag) {
    std::vector<real_t> base = random_vec(spec.d_e, 1.0, rng);
    entries.emplace_back(tok, base);
    entries.emplace_back("zz" + tok, displaced(base, twin_mag, rng));
  };
  for (const auto& t : fillers) add_pair(t, spec.filler_shift_mag);
  for (int c = 0; c < 3; ++c) {
    for (const auto& t : subj_cues[c]) add_pair(t, spec.subj_shift_mag);
    for (const auto& t : obj_cues[c]) add_pair(t, spec.obj_shift_mag);
  }
  auto table = std::make_shared<EmbeddingTable>(make_embedding_table(entries));

  auto gen_corpus = [&](int count, Domain domain, const char* id_prefix, Rng& gen_rng,
                        std::vector<Stance>* gold_out) {
    Corpus corpus;
    corpus.domain = domain;
    corpus.topic = "synthetic";
    for (int i = 0; i < count; ++i) {
      Stance y = static_cast<Stance>(gen_rng.uniform_int(3));
      double mix = gen_rng.uniform();
      bool with_subj = mix < spec.p_subj_only || mix >= spec.p_subj_only + spec.p_obj_only;
      bool with_obj = mix >= spec.p_subj_only;

      std::vector<std::string> toks;
      auto plant = [&](const std::vector<std::string>& cue_set) {
        int k = spec.cue_count_min + gen_rng.uniform_int(spec.cue_count_max - spec.cue_count_min + 1);
        for (int j = 0; j < k; ++j) toks.push_back(cue_set[gen_rng.uniform_int(static_cast<int>(cue_set.size()))]);
      };
      if (with_subj) plant(subj_cues[static_cast<int>(y)]);
      if (with_obj) plant(obj_cues[static_cast<int>(y)]);
      int len = spec.seq_len_min + gen_rng.uniform_int(spec.seq_len_max - spec.seq_len_min + 1);
      while (static_cast<int>(toks.size()) < len)
        toks.push_back(fillers[gen_rng.uniform_int(static_cast<int>(fillers.size()))]);
      gen_rng.shuffle(toks);

      if (domain == Domain::Target) {
        for (auto& t : toks)
          if (gen_rng.uniform() < spec.shift_rate) t = "zz" + t;
      }

      Example e;
      e.id = std::string(id_prefix) + std::to_string(i);
      e.topic = "synthetic";
      std::string text;
      for (size_t j = 0; j < toks.size(); ++j) {
        if (j) text += ' ';
        text += toks[j];
      }
      e.text = std::move(text);
      e.tokens = std::move(toks);
      e.domain = domain;
      e.silver_subj = with_subj ? 1 : 0;
      e.silver_obj = with_obj ? 1 : 0;
      if (domain == Domain::Source) {
        e.stance = y;
      } else {
        gold_out->push_back(y);
      }
      corpus.examples.push_back(std::move(e));
    }
    return corpus;
  };

  SyntheticData data;
  Rng src_rng = Rng::derive(spec.seed, 0x50A1);
  Rng tgt_rng = Rng::derive(spec.seed, 0x7A26);
  data.source = gen_corpus(spec.n_source, Domain::Source, "s", src_rng, nullptr);
  data.target = gen_corpus(spec.n_target, Domain::Target, "t", tgt_rng, &data.target_gold);
  data.table = table;
  assign_token_ids(data.source, *table);
  assign_token_ids(data.target, *table);
  return data;
}

// ---------------------------------------------------------------------------
// batch sampling
// ---------------------------------------------------------------------------

namespace {

std::vector<int> epoch_permutation(int n, uint64_t seed, int domain_key, int64_t epoch) {
  std::vector<int> perm(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
  Rng rng = Rng::derive(seed, 0xBA7C + static_cast<uint64_t>(domain_key), static_cast<uint64_t>(epoch));
  rng.shuffle(perm);
  return perm;
}

std::vector<int> sample_domain(int n, int m, uint64_t seed, int domain_key, int iteration) {
  std::vector<int> idx(static_cast<size_t>(m));
  if (m > n) {
    static bool warned = false;
    if (!warned) {
      std::cerr << "sample_batches: batch size " << m << " exceeds corpus size " << n
                << ", sampling with replacement\n";
      warned = true;
    }
    Rng rng = Rng::derive(seed, 0xF00D + static_cast<uint64_t>(domain_key), static_cast<uint64_t>(iteration));
    for (int k = 0; k < m; ++k) idx[static_cast<size_t>(k)] = rng.uniform_int(n);
    return idx;
  }
  int64_t base = static_cast<int64_t>(iteration) * m;
  int64_t cached_epoch = -1;
  std::vector<int> perm;
  for (int k = 0; k < m; ++k) {
    int64_t pos = base + k;
    int64_t epoch = pos / n;
    if (epoch != cached_epoch) {
      perm = epoch_permutation(n, seed, domain_key, epoch);
      cached_epoch = epoch;
    }
    idx[static_cast<size_t>(k)] = perm[static_cast<size_t>(pos % n)];
  }
  return idx;
}

}  // namespace

BatchPair sample_batches(const Corpus& source, const Corpus& target, int m, uint64_t seed, int iteration) {
  if (source.examples.empty() || target.examples.empty())
    throw DataError("sample_batches: corpora must be non-empty");
  if (m < 1) throw ConfigError("sample_batches: batch size must be >= 1");
  if (iteration < 0) throw ConfigError("sample_batches: iteration must be >= 0");
  BatchPair out;
  out.source = sample_domain(static_cast<int>(source.size()), m, seed, 0, iteration);
  out.target = sample_domain(static_cast<int>(target.size()), m, seed, 1, iteration);
  return out;
}

std::pair<Corpus, Corpus> split_validation(const Corpus& source, double val_fraction, uint64_t seed) {
  if (val_fraction < 0 || val_fraction >= 1)
    throw ConfigError("split_validation: fraction must lie in [0,1), got " + std::to_string(val_fraction));
  const int n = static_cast<int>(source.size());
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  Rng rng = Rng::derive(seed, 0x5EED);
  rng.shuffle(order);
  int n_val = static_cast<int>(std::floor(n * val_fraction));
  if (val_fraction > 0 && n_val == 0 && n > 1) n_val = 1;
  Corpus train, val;
  train.domain = val.domain = source.domain;
  train.topic = val.topic = source.topic;
  for (int i = 0; i < n; ++i) {
    const Example& e = source.examples[static_cast<size_t>(order[static_cast<size_t>(i)])];
    (i < n_val ? val : train).examples.push_back(e);
  }
  return {train, val};
}

}  // namespace dan
