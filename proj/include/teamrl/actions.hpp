#ifndef TEAMRL_ACTIONS_HPP_
#define TEAMRL_ACTIONS_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace teamrl {

enum class Verb : int {
  Plan = 0,
  DraftSection,
  Implement,
  ProposeChange,
  Integrate,
  Lint,
  Test,
  Repair,
  Finalize,
  Handoff,
};

inline constexpr int kVerbCount = 10;

inline const char* verb_name(Verb v) {
  static constexpr std::array<const char*, kVerbCount> names = {
      "Plan",   "DraftSection", "Implement", "ProposeChange", "Integrate",
      "Lint",   "Test",         "Repair",    "Finalize",      "Handoff"};
  return names[static_cast<int>(v)];
}

inline bool verb_from_name(const std::string& s, Verb* out) {
  for (int i = 0; i < kVerbCount; ++i) {
    Verb v = static_cast<Verb>(i);
    if (s == verb_name(v)) {
      *out = v;
      return true;
    }
  }
  return false;
}

// Summary-rail entry kinds. The rail records decisions and blockers only.
enum class DecisionKind : int {
  ScopeFrozen = 0,
  TermFrozen,
  ChangeAccepted,
  BlockerRaised,
};

inline const char* decision_name(DecisionKind k) {
  static constexpr std::array<const char*, 4> names = {
      "ScopeFrozen", "TermFrozen", "ChangeAccepted", "BlockerRaised"};
  return names[static_cast<int>(k)];
}

// Credit/penalty attribution codes for audit fragments.
enum class ReasonCode : int {
  redundant_turn = 0,
  overlong_message,
  conflict_reopen,
  schema_violation,
  unsafe_tool,
  style_drift,
  progress,
  test_evidence,
};

inline constexpr int kReasonCount = 8;

inline const char* reason_name(ReasonCode r) {
  static constexpr std::array<const char*, kReasonCount> names = {
      "redundant_turn", "overlong_message", "conflict_reopen",
      "schema_violation", "unsafe_tool",     "style_drift",
      "progress",        "test_evidence"};
  return names[static_cast<int>(r)];
}

// One structured action. Slot/assertion targets are resolved indices;
// -1 means "not applicable". Plan carries the proposed ordering, drafts
// carry the message length in tokens.
struct ActionPrimitive {
  Verb verb = Verb::Handoff;
  int target_slot = -1;
  int failing_assertion = -1;          // Repair only
  std::vector<int> proposed_order;     // Plan only
  int proposed_tag = -1;               // Plan only
  int message_tokens = 0;              // DraftSection / Implement only

  bool operator==(const ActionPrimitive& o) const = default;
};

// Per-turn ledger entry. Everything the reward engine, guards and audit
// report need to reconstruct what a turn did.
struct StepLog {
  int turn = 0;
  int role_index = -1;
  std::string role;
  Verb verb = Verb::Handoff;
  int target_slot = -1;
  bool applied = false;            // false => absorbed as schema violation
  bool schema_violation = false;
  bool unsafe_tool = false;
  bool attempt_failed = false;     // draft/implement/repair roll failed
  bool novel_effect = false;       // artifact/rail/receipt state advanced
  bool terminal_action = false;
  int ticks_cost = 0;
  int tokens_spent = 0;
  int tokens_over_budget = 0;
  int rail_appends = 0;
  int receipt_index = -1;          // into EpisodeState::receipts
  bool conflict_reopen = false;    // ProposeChange on an Integrated slot
  bool coach_intervention = false;
  bool forced_handoff = false;
  // Draft bookkeeping for quality attribution.
  bool drafted_in_order = false;
  int tag_assigned = -1;
};

}  // namespace teamrl

#endif  // TEAMRL_ACTIONS_HPP_
