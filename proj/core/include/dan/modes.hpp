#pragma once

#include <string>

namespace dan {

enum class Domain { Source, Target };

inline const char* domain_name(Domain d) { return d == Domain::Source ? "source" : "target"; }

/// Which views the model carries. The dual-*-only variants keep both
/// encoders and the gate but only one auxiliary head and one examiner.
enum class ViewMode { Single, Dual, DualSubjOnly, DualObjOnly };

/// How (and whether) source/target features are aligned.
enum class AlignerKind { None, Coral, HAdversarial, Wasserstein };

inline bool is_adversarial(AlignerKind k) {
  return k == AlignerKind::HAdversarial || k == AlignerKind::Wasserstein;
}

std::string to_string(ViewMode m);
std::string to_string(AlignerKind k);
ViewMode view_mode_from_string(const std::string& s);
AlignerKind aligner_from_string(const std::string& s);

}  // namespace dan
