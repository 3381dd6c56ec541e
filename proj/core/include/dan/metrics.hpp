#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dan/data.hpp"
#include "dan/model.hpp"

namespace dan {

/// Unweighted mean of per-class F1 over `classes`. A class absent from both
/// gold and predictions contributes F1 = 0 (warned on stderr).
real_t macro_f1(const std::vector<int>& predictions, const std::vector<int>& gold, const std::vector<int>& classes);

/// default class set {favour, against, neutral}
real_t macro_f1(const std::vector<int>& predictions, const std::vector<int>& gold);

/// SemEval convention: favour/against only
real_t macro_f1_favour_against(const std::vector<int>& predictions, const std::vector<int>& gold);

struct FeatureDumpRow {
  std::string id;
  Domain domain = Domain::Source;
  std::optional<Stance> label;
  std::vector<real_t> feature;
};

/// Per-example feature vectors with domain/label metadata; the interchange
/// format for PAD and external plotting.
struct FeatureDump {
  std::string view;  // subj | obj | dual
  int width = 0;
  std::vector<FeatureDumpRow> rows;
};

/// CSV with header `id,domain,label,f_0,...,f_{d-1}`
void write_feature_dump(const std::string& path, const FeatureDump& dump);
FeatureDump read_feature_dump(const std::string& path);

/// Extract view features for every example (inference mode, fusion gate
/// applied for the dual view), write them to `path`, and return the dump.
FeatureDump export_features(const DanModel& model, const Corpus& corpus, const std::string& view,
                            const std::string& path);

/// compute without writing
FeatureDump collect_features(const DanModel& model, const Corpus& corpus, const std::string& view);

struct ProbeConfig {
  int epochs = 20;
  real_t lr = 0.01;
  double train_fraction = 0.8;
  uint64_t seed = 0;
};

struct PadEstimate {
  real_t epsilon = 0;  // held-out domain-classification error
  real_t pad = 0;      // 2 * (1 - 2*epsilon)
  int n_source = 0;
  int n_target = 0;
  std::string view;
  std::string probe_description;
};

/// Proxy A-distance: pool the two dumps, split 80/20 stratified by domain,
/// fit a hinge-loss linear probe by gradient descent, and report the
/// held-out error epsilon and PAD = 2(1 - 2*epsilon).
PadEstimate proxy_a_distance(const FeatureDump& source_dump, const FeatureDump& target_dump,
                             const ProbeConfig& probe = {});

/// single JSON record {epsilon, pad, n_source, n_target, view}
std::string pad_report_json(const PadEstimate& e);

}  // namespace dan
