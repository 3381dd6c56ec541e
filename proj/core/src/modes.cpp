#include "dan/modes.hpp"

#include "dan/errors.hpp"

namespace dan {

std::string to_string(ViewMode m) {
  switch (m) {
    case ViewMode::Single:
      return "single";
    case ViewMode::Dual:
      return "dual";
    case ViewMode::DualSubjOnly:
      return "dual-subj-only";
    case ViewMode::DualObjOnly:
      return "dual-obj-only";
  }
  return "?";
}

std::string to_string(AlignerKind k) {
  switch (k) {
    case AlignerKind::None:
      return "none";
    case AlignerKind::Coral:
      return "coral";
    case AlignerKind::HAdversarial:
      return "h-adversarial";
    case AlignerKind::Wasserstein:
      return "wasserstein";
  }
  return "?";
}

ViewMode view_mode_from_string(const std::string& s) {
  if (s == "single") return ViewMode::Single;
  if (s == "dual") return ViewMode::Dual;
  if (s == "dual-subj-only") return ViewMode::DualSubjOnly;
  if (s == "dual-obj-only") return ViewMode::DualObjOnly;
  throw ConfigError("unknown view mode '" + s + "' (expected single|dual|dual-subj-only|dual-obj-only)");
}

AlignerKind aligner_from_string(const std::string& s) {
  if (s == "none" || s == "so") return AlignerKind::None;
  if (s == "coral") return AlignerKind::Coral;
  if (s == "h-adversarial" || s == "dann") return AlignerKind::HAdversarial;
  if (s == "wasserstein" || s == "wdgrl") return AlignerKind::Wasserstein;
  throw ConfigError("unknown aligner '" + s + "' (expected none|coral|h-adversarial|wasserstein)");
}

}  // namespace dan
