#include "dan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dan/errors.hpp"
#include "dan/rng.hpp"

#include "json.hpp"

namespace dan {

real_t macro_f1(const std::vector<int>& predictions, const std::vector<int>& gold, const std::vector<int>& classes) {
  if (predictions.empty()) throw std::invalid_argument("macro_f1: empty input");
  if (predictions.size() != gold.size())
    throw std::invalid_argument("macro_f1: " + std::to_string(predictions.size()) + " predictions vs " +
                                std::to_string(gold.size()) + " gold labels");
  if (classes.empty()) throw std::invalid_argument("macro_f1: empty class set");

  real_t total = 0;
  for (int c : classes) {
    int64_t tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < gold.size(); ++i) {
      bool p = predictions[i] == c, g = gold[i] == c;
      tp += p && g;
      fp += p && !g;
      fn += !p && g;
    }
    if (tp + fp + fn == 0) {
      std::cerr << "macro_f1: class " << c << " absent from both gold and predictions, contributes F1=0\n";
      continue;
    }
    if (tp == 0) continue;  // F1 = 0
    real_t precision = static_cast<real_t>(tp) / (tp + fp);
    real_t recall = static_cast<real_t>(tp) / (tp + fn);
    total += 2 * precision * recall / (precision + recall);
  }
  return total / static_cast<real_t>(classes.size());
}

real_t macro_f1(const std::vector<int>& predictions, const std::vector<int>& gold) {
  return macro_f1(predictions, gold, {0, 1, 2});
}

real_t macro_f1_favour_against(const std::vector<int>& predictions, const std::vector<int>& gold) {
  return macro_f1(predictions, gold,
                  {static_cast<int>(Stance::Favour), static_cast<int>(Stance::Against)});
}

// ---------------------------------------------------------------------------
// feature dumps
// ---------------------------------------------------------------------------

namespace {

std::string format_value(real_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", static_cast<double>(v));
  return buf;
}

}  // namespace

void write_feature_dump(const std::string& path, const FeatureDump& dump) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write feature dump: " + path);
  out << "id,domain,label";
  for (int j = 0; j < dump.width; ++j) out << ",f_" << j;
  out << '\n';
  for (const auto& row : dump.rows) {
    out << row.id << ',' << domain_name(row.domain) << ',' << (row.label ? stance_name(*row.label) : "");
    for (real_t v : row.feature) out << ',' << format_value(v);
    out << '\n';
  }
}

FeatureDump read_feature_dump(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature dump: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty dump");
  // header: id,domain,label,f_0,...
  int width = -3;
  for (char c : line) width += c == ',';
  ++width;
  if (width < 1) throw DataError(path + ": header has no feature columns");

  FeatureDump dump;
  dump.width = width;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    size_t start = 0;
    while (true) {
      size_t pos = line.find(',', start);
      if (pos == std::string::npos) {
        cols.push_back(line.substr(start));
        break;
      }
      cols.push_back(line.substr(start, pos - start));
      start = pos + 1;
    }
    if (static_cast<int>(cols.size()) != width + 3)
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(width + 3) +
                      " columns, got " + std::to_string(cols.size()));
    FeatureDumpRow row;
    row.id = cols[0];
    if (cols[1] == "source")
      row.domain = Domain::Source;
    else if (cols[1] == "target")
      row.domain = Domain::Target;
    else
      throw DataError(path + ":" + std::to_string(line_no) + ": bad domain '" + cols[1] + "'");
    if (!cols[2].empty()) row.label = stance_from_string(cols[2]);
    row.feature.reserve(static_cast<size_t>(width));
    for (int j = 0; j < width; ++j) row.feature.push_back(static_cast<real_t>(std::stod(cols[static_cast<size_t>(j) + 3])));
    dump.rows.push_back(std::move(row));
  }
  return dump;
}

FeatureDump collect_features(const DanModel& model, const Corpus& corpus, const std::string& view) {
  if (view != "subj" && view != "obj" && view != "dual")
    throw std::invalid_argument("collect_features: unknown view '" + view + "' (expected subj|obj|dual)");
  if (view != "subj" && model.spec.view_mode == ViewMode::Single)
    throw std::invalid_argument("collect_features: single-view model only exports view 'subj'");

  FeatureDump dump;
  dump.view = view;
  dump.width = model.spec.d_h;
  for (const auto& e : corpus.examples) {
    Tensor f;
    if (view == "subj") {
      f = encode_view(e.token_ids, model, ViewId::Subj);
    } else if (view == "obj") {
      f = encode_view(e.token_ids, model, ViewId::Obj);
    } else {
      auto [f_subj, f_obj] = encode_views(e.token_ids, model);
      f = fuse(f_subj, f_obj, model).second;
    }
    FeatureDumpRow row;
    row.id = e.id;
    row.domain = e.domain;
    row.label = e.stance;
    row.feature = f.to_vector();
    dump.rows.push_back(std::move(row));
  }
  return dump;
}

FeatureDump export_features(const DanModel& model, const Corpus& corpus, const std::string& view,
                            const std::string& path) {
  FeatureDump dump = collect_features(model, corpus, view);
  write_feature_dump(path, dump);
  return dump;
}

// ---------------------------------------------------------------------------
// proxy A-distance
// ---------------------------------------------------------------------------

PadEstimate proxy_a_distance(const FeatureDump& source_dump, const FeatureDump& target_dump,
                             const ProbeConfig& probe) {
  if (source_dump.rows.empty() || target_dump.rows.empty())
    throw std::invalid_argument("proxy_a_distance: empty dump");
  if (source_dump.width != target_dump.width)
    throw std::invalid_argument("proxy_a_distance: width mismatch " + std::to_string(source_dump.width) + " vs " +
                                std::to_string(target_dump.width));
  if (source_dump.rows.size() < 5 || target_dump.rows.size() < 5)
    throw std::invalid_argument("proxy_a_distance: each domain needs >= 5 examples, got " +
                                std::to_string(source_dump.rows.size()) + " / " +
                                std::to_string(target_dump.rows.size()));

  const int d = source_dump.width;
  struct Point {
    const std::vector<real_t>* x;
    int y;  // +1 source, -1 target
  };
  std::vector<Point> train, test;

  // stratified 80/20 split, deterministic in the probe seed
  auto split = [&](const FeatureDump& dump, int y, uint64_t salt) {
    std::vector<int> order(dump.rows.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng rng = Rng::derive(probe.seed, 0xAD15, salt);
    rng.shuffle(order);
    size_t n_train = static_cast<size_t>(std::floor(order.size() * probe.train_fraction));
    n_train = std::min(std::max<size_t>(n_train, 1), order.size() - 1);
    for (size_t i = 0; i < order.size(); ++i) {
      Point p{&dump.rows[static_cast<size_t>(order[i])].feature, y};
      (i < n_train ? train : test).push_back(p);
    }
  };
  split(source_dump, +1, 1);
  split(target_dump, -1, 2);

  // hinge-loss linear probe, full-batch gradient descent
  std::vector<real_t> w(static_cast<size_t>(d), real_t(0));
  real_t b = 0;
  const real_t inv_n = real_t(1) / static_cast<real_t>(train.size());
  for (int epoch = 0; epoch < probe.epochs; ++epoch) {
    std::vector<real_t> gw(static_cast<size_t>(d), real_t(0));
    real_t gb = 0;
    for (const Point& p : train) {
      real_t z = b;
      for (int j = 0; j < d; ++j) z += w[static_cast<size_t>(j)] * (*p.x)[static_cast<size_t>(j)];
      if (p.y * z < 1) {
        for (int j = 0; j < d; ++j) gw[static_cast<size_t>(j)] -= p.y * (*p.x)[static_cast<size_t>(j)];
        gb -= p.y;
      }
    }
    for (int j = 0; j < d; ++j) w[static_cast<size_t>(j)] -= probe.lr * gw[static_cast<size_t>(j)] * inv_n;
    b -= probe.lr * gb * inv_n;
  }

  int64_t errors = 0;
  for (const Point& p : test) {
    real_t z = b;
    for (int j = 0; j < d; ++j) z += w[static_cast<size_t>(j)] * (*p.x)[static_cast<size_t>(j)];
    int pred = z >= 0 ? +1 : -1;  // ties resolve to source
    errors += pred != p.y;
  }
  PadEstimate est;
  est.epsilon = static_cast<real_t>(errors) / static_cast<real_t>(test.size());
  est.pad = 2 * (1 - 2 * est.epsilon);
  est.n_source = static_cast<int>(source_dump.rows.size());
  est.n_target = static_cast<int>(target_dump.rows.size());
  est.view = source_dump.view;
  est.probe_description = "linear hinge probe, " + std::to_string(probe.epochs) + " epochs, lr " +
                          std::to_string(static_cast<double>(probe.lr)) + ", 80/20 stratified split";
  return est;
}

std::string pad_report_json(const PadEstimate& e) {
  nlohmann::json j;
  j["epsilon"] = static_cast<double>(e.epsilon);
  j["pad"] = static_cast<double>(e.pad);
  j["n_source"] = e.n_source;
  j["n_target"] = e.n_target;
  j["view"] = e.view;
  return j.dump();
}

}  // namespace dan
