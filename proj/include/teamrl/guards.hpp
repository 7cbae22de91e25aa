#ifndef TEAMRL_GUARDS_HPP_
#define TEAMRL_GUARDS_HPP_

#include <algorithm>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include "teamrl/actions.hpp"

namespace teamrl {

struct GuardConfig {
  int handoff_nudge_after = 3;    // N1: consecutive turns before a nudge
  int handoff_force_after = 5;    // N2: consecutive turns before a forced handoff
  int coach_window = 6;           // W: step logs the coach inspects
  int coach_loop_threshold = 3;   // L: identical no-delta repeats that trigger
  int coach_cooldown = 3;         // C: turns a looping action stays suppressed
  int message_budget_per_role = 240;  // tokens a role may spend on drafts

  void validate() const {
    if (handoff_force_after <= handoff_nudge_after)
      throw std::invalid_argument("guards: N2 must exceed N1");
    if (coach_window < coach_loop_threshold)
      throw std::invalid_argument("guards: coach window smaller than threshold");
    if (message_budget_per_role < 0)
      throw std::invalid_argument("guards: negative message budget");
  }
};

// Remaining per-episode allowances. Decremented, never incremented.
struct BudgetState {
  int ticks_remaining = 0;
  int turns_remaining = 0;
  std::vector<int> message_tokens_remaining;  // by role index

  bool operator==(const BudgetState& o) const = default;
};

enum class HandoffSignal : int { none = 0, nudge, forced_handoff };

enum class BudgetDecision : int { allow = 0, truncate, deny };

struct SafetyVerdict {
  bool allowed = true;
  enum class Reason : int { ok = 0, unsafe_tool_arg, red_flag_prompt } reason =
      Reason::ok;
};

inline const char* safety_reason_name(SafetyVerdict::Reason r) {
  switch (r) {
    case SafetyVerdict::Reason::ok: return "ok";
    case SafetyVerdict::Reason::unsafe_tool_arg: return "unsafe_tool_arg";
    default: return "red_flag_prompt";
  }
}

// A (role, verb, target) the coach has pulled from the legal set.
struct Suppression {
  int role_index = -1;
  Verb verb = Verb::Handoff;
  int target_slot = -1;
  int until_turn = 0;  // suppressed while state.turn < until_turn
};

struct Intervention {
  int role_index = -1;
  Verb verb = Verb::Handoff;
  int target_slot = -1;
  int issued_turn = 0;
};

struct CoachState {
  std::deque<StepLog> window;  // last W step logs
  int interventions_issued = 0;

  void push(const StepLog& log, int window_size) {
    window.push_back(log);
    while (static_cast<int>(window.size()) > window_size) window.pop_front();
  }
};

// Handoff clock: signal for the turn a role is ABOUT to take, given how
// many consecutive turns it has already held the floor.
inline HandoffSignal tick_handoff_clock(int consecutive_turns_so_far,
                                        const GuardConfig& cfg) {
  int upcoming = consecutive_turns_so_far + 1;
  if (upcoming >= cfg.handoff_force_after) return HandoffSignal::forced_handoff;
  if (upcoming >= cfg.handoff_nudge_after) return HandoffSignal::nudge;
  return HandoffSignal::none;
}

// Message budget gate. Mutates nothing; the environment applies the
// decrement after the action is accepted.
inline BudgetDecision check_message_budget(const BudgetState& budget,
                                           int role_index, int payload_tokens) {
  if (payload_tokens <= 0) return BudgetDecision::allow;
  int remaining = budget.message_tokens_remaining.at(role_index);
  if (payload_tokens <= remaining) return BudgetDecision::allow;
  if (remaining > 0) return BudgetDecision::truncate;
  return BudgetDecision::deny;
}

// Synthetic safety screen: tool calls aimed at a flagged slot are refused.
inline SafetyVerdict safety_screen(Verb verb, int target_slot,
                                   const std::vector<bool>& unsafe_markers) {
  SafetyVerdict v;
  if ((verb == Verb::Lint || verb == Verb::Test) && target_slot >= 0 &&
      target_slot < static_cast<int>(unsafe_markers.size()) &&
      unsafe_markers[target_slot]) {
    v.allowed = false;
    v.reason = SafetyVerdict::Reason::unsafe_tool_arg;
  }
  return v;
}

// Coach monitor: >= L identical (role, verb, target) entries with no
// artifact delta inside the window means the team is looping.
inline bool coach_intervene(const CoachState& coach, const GuardConfig& cfg,
                            Intervention* out) {
  for (auto it = coach.window.rbegin(); it != coach.window.rend(); ++it) {
    const StepLog& candidate = *it;
    if (candidate.novel_effect || candidate.verb == Verb::Handoff) continue;
    int repeats = 0;
    for (const StepLog& log : coach.window) {
      if (!log.novel_effect && log.role_index == candidate.role_index &&
          log.verb == candidate.verb && log.target_slot == candidate.target_slot)
        ++repeats;
    }
    if (repeats >= cfg.coach_loop_threshold) {
      if (out) {
        out->role_index = candidate.role_index;
        out->verb = candidate.verb;
        out->target_slot = candidate.target_slot;
        out->issued_turn = candidate.turn;
      }
      return true;
    }
  }
  return false;
}

inline bool is_suppressed(const std::vector<Suppression>& list, int turn,
                          int role_index, Verb verb, int target_slot) {
  for (const Suppression& s : list) {
    if (turn < s.until_turn && s.role_index == role_index && s.verb == verb &&
        s.target_slot == target_slot)
      return true;
  }
  return false;
}

}  // namespace teamrl

#endif  // TEAMRL_GUARDS_HPP_
