#ifndef TEAMRL_ENV_HPP_
#define TEAMRL_ENV_HPP_

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "teamrl/actions.hpp"
#include "teamrl/guards.hpp"
#include "teamrl/rng.hpp"
#include "teamrl/task.hpp"

namespace teamrl {

// Synthetic team-skill model. Drafting succeeds with probability
// skill + plan_bonus when scope is frozen; implementation quality and
// terminology adherence follow the same specialist/generalist split.
struct EnvConfig {
  GuardConfig guards;

  double plan_bonus = 0.25;
  double specialist_draft_skill = 0.72;
  double generalist_draft_skill = 0.42;
  double solo_draft_skill = 0.60;
  double specialist_tag_adherence = 0.95;
  double solo_tag_adherence = 0.75;
  double generalist_tag_adherence = 0.60;
  double specialist_repair_skill = 0.88;
  double solo_repair_skill = 0.55;
  double generalist_repair_skill = 0.50;
  double max_success_prob = 0.98;
  double impl_quality_noise = 0.08;

  double partial_credit_factor = 0.5;
  double repair_margin_decay = 0.5;
  double style_drift_threshold = 0.25;  // final style below this is a compliance event

  int draft_tokens_min = 30;
  int draft_tokens_max = 90;
  int rail_digest_window = 4;        // R
  int observation_slice_cap = 8;     // max slot views in an artifact slice

  // Wall-clock model: tools cost more than thinking steps.
  std::array<int, kVerbCount> tick_costs = {1, 2, 2, 1, 1, 3, 3, 2, 1, 1};
  // Message overhead charged per verb on top of draft payloads.
  std::array<int, kVerbCount> base_tokens = {20, 0, 0, 12, 6, 4, 4, 10, 8, 2};

  int tick_cost(Verb v) const { return tick_costs[static_cast<int>(v)]; }
  int base_token_cost(Verb v) const { return base_tokens[static_cast<int>(v)]; }

  void validate() const {
    guards.validate();
    if (draft_tokens_min <= 0 || draft_tokens_max < draft_tokens_min)
      throw std::invalid_argument("env: bad draft token range");
    if (rail_digest_window < 1) throw std::invalid_argument("env: rail window < 1");
    for (int c : tick_costs)
      if (c <= 0) throw std::invalid_argument("env: tick costs must be positive");
  }
};

struct RoleSkill {
  double draft = 0.0;
  double tag_adherence = 0.0;
  double repair = 0.0;
};

inline RoleSkill role_skill(const std::string& role, TaskFamily family,
                            const EnvConfig& cfg) {
  RoleSkill s{cfg.generalist_draft_skill, cfg.generalist_tag_adherence,
              cfg.generalist_repair_skill};
  const bool writing = family == TaskFamily::writing;
  if (role == "solo") {
    s = {cfg.solo_draft_skill, cfg.solo_tag_adherence, cfg.solo_repair_skill};
  } else if (role == "writer") {
    if (writing) s.draft = cfg.specialist_draft_skill;
    s.tag_adherence = writing ? cfg.specialist_tag_adherence : s.tag_adherence;
    s.repair = 0.80;
  } else if (role == "coder") {
    if (!writing) s.draft = cfg.specialist_draft_skill;
    s.tag_adherence = !writing ? 0.90 : s.tag_adherence;
    s.repair = 0.85;
  } else if (role == "tester") {
    s.repair = cfg.specialist_repair_skill;
  }
  return s;
}

enum class SlotStatus : int { Empty = 0, Drafted, Integrated, Passing, Failing };

inline constexpr int kSlotStatusCount = 5;

inline const char* slot_status_name(SlotStatus s) {
  static constexpr std::array<const char*, kSlotStatusCount> names = {
      "Empty", "Drafted", "Integrated", "Passing", "Failing"};
  return names[static_cast<int>(s)];
}

// Workflow tier: Empty < drafted-tier (Drafted/Passing/Failing) < Integrated.
inline int slot_tier(SlotStatus s) {
  switch (s) {
    case SlotStatus::Empty: return 0;
    case SlotStatus::Integrated: return 2;
    default: return 1;
  }
}

struct AssertionState {
  bool repaired = false;
  double margin_factor = 1.0;  // shrunk by unsuccessful repairs
  int last_touch_turn = -1;
  int last_touch_role = -1;

  bool operator==(const AssertionState& o) const = default;
};

struct SlotState {
  SlotStatus status = SlotStatus::Empty;
  int terminology_tag = -1;       // -1 until drafted
  int order_drafted = -1;         // draft sequence number
  bool drafted_while_frozen = false;
  bool drafted_in_order = false;  // all planned predecessors existed at draft time
  bool unanchored = false;        // drafted before TermFrozen
  double impl_quality = -1.0;     // coding; -1 until implemented
  bool tested_once = false;
  int last_change_turn = -1;      // content changes invalidate old receipts
  int drafted_by_role = -1;
  int drafted_turn = -1;
  int tag_set_turn = -1;          // turn/role that last decided the tag
  int tag_set_role = -1;
  std::vector<AssertionState> assertions;

  bool operator==(const SlotState& o) const = default;
};

struct DecisionRecord {
  DecisionKind kind = DecisionKind::ScopeFrozen;
  int turn = 0;
  int slot = -1;                 // ChangeAccepted / BlockerRaised target
  int tag = -1;                  // TermFrozen payload
  std::vector<int> order;        // ScopeFrozen payload

  bool operator==(const DecisionRecord& o) const = default;
};

// Append-only, decisions-and-blockers-only record shared by all roles.
struct SummaryRail {
  std::vector<DecisionRecord> decisions;

  bool scope_frozen() const {
    for (const auto& d : decisions)
      if (d.kind == DecisionKind::ScopeFrozen) return true;
    return false;
  }
  bool term_frozen() const {
    for (const auto& d : decisions)
      if (d.kind == DecisionKind::TermFrozen) return true;
    return false;
  }
  int frozen_tag() const {
    for (const auto& d : decisions)
      if (d.kind == DecisionKind::TermFrozen) return d.tag;
    return -1;
  }

  bool operator==(const SummaryRail& o) const = default;
};

struct RoleMemory {
  std::string role;
  std::set<int> checklist;  // open item ids (owned slots still unfinished)
  int notes_size = 0;       // private scratch tokens

  bool operator==(const RoleMemory& o) const = default;
};

struct ToolReceipt {
  Verb tool = Verb::Lint;  // Lint or Test
  int slot = -1;
  int lint_violations = 0;
  int fixable_violations = 0;           // tag issues a Repair can address
  std::vector<bool> assertion_pass;     // Test only
  std::vector<double> assertion_margins;  // fail margins, 0 for passing
  int tick_cost = 0;
  int turn_issued = 0;

  bool any_failing() const {
    if (fixable_violations > 0) return true;
    for (bool p : assertion_pass)
      if (!p) return true;
    return false;
  }

  bool operator==(const ToolReceipt& o) const = default;
};

enum class TerminationReason : int { Finalized = 0, Handoff, Timeout };

inline const char* termination_name(TerminationReason r) {
  switch (r) {
    case TerminationReason::Finalized: return "Finalized";
    case TerminationReason::Handoff: return "Handoff";
    default: return "Timeout";
  }
}

struct SlotView {
  int slot = -1;
  SlotStatus status = SlotStatus::Empty;
  int terminology_tag = -1;
  int order_drafted = -1;
  bool unsafe_marker = false;
  int assertion_count = 0;
  int failing_assertions = 0;  // per the latest fresh receipt, else 0

  bool operator==(const SlotView& o) const = default;
};

struct BriefDigest {
  TaskFamily family = TaskFamily::writing;
  Difficulty difficulty = Difficulty::easy;
  int slot_count = 0;
  int max_turns = 0;
  int tick_budget = 0;

  bool operator==(const BriefDigest& o) const = default;
};

struct RemainingBudget {
  int turns = 0;
  int ticks = 0;
  int message_tokens = 0;

  bool operator==(const RemainingBudget& o) const = default;
};

// Bounded role-local view: own slice, shared histogram/rail digest, own
// memory, budgets. Never contains another role's memory.
struct Observation {
  std::string role;
  int role_index = -1;
  BriefDigest brief_digest;
  std::vector<SlotView> artifact_slice;       // own slots only, capped
  std::array<int, kSlotStatusCount> slot_histogram{};
  std::vector<DecisionRecord> rail_digest;    // last R decisions
  RoleMemory own_memory;
  RemainingBudget remaining_budget;
  bool nudge = false;
  bool scope_frozen = false;
  bool term_frozen = false;
  int failing_receipt_count = 0;   // receipts with failing evidence, episode-wide
  bool own_failing_evidence = false;
  bool own_empty_slot = false;
  bool own_flawed_slot = false;
  bool finalize_ready = false;
  int consecutive_turns = 0;
  bool has_floor = false;

  bool operator==(const Observation& o) const = default;
};

struct QualityBreakdown {
  double structure = 0.0;      // writing
  double style = 0.0;          // writing
  double pass_fraction = 0.0;  // coding, with partial credit
  double overall = 0.0;

  bool operator==(const QualityBreakdown& o) const = default;
};

// Full ground-truth state of one episode. Confined to one worker; all
// randomness flows through per-role counter streams keyed by the seed.
struct EpisodeState {
  TaskSpec task;
  std::vector<std::string> team;      // speaking order (permuted by caller)
  std::vector<int> slot_owner;        // role index per slot
  std::vector<SlotState> slots;
  SummaryRail rail;
  std::vector<RoleMemory> memories;   // by role index
  std::vector<ToolReceipt> receipts;
  int turn = 0;
  int ticks_elapsed = 0;
  int token_count = 0;
  BudgetState budgets;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> env_draw_counters;  // per role
  std::optional<TerminationReason> terminal;

  // Guard state.
  int current_speaker = 0;
  int consecutive_turns = 0;      // by the current speaker, before this turn
  int consecutive_handoffs = 0;   // full cycle => handoff to human
  std::vector<Suppression> suppressions;
  CoachState coach;
  EnvConfig config;

  // Cumulative counters (also exposed as global features).
  int violation_count = 0;
  int unsafe_event_count = 0;
  int redundant_count = 0;
  int conflict_count = 0;
  int draft_sequence = 0;  // number of successful drafts so far

  int role_index(const std::string& role) const {
    for (int i = 0; i < static_cast<int>(team.size()); ++i)
      if (team[i] == role) return i;
    return -1;
  }

  double env_draw(int role_index_) {
    std::uint64_t c = env_draw_counters[role_index_]++;
    return u64_to_unit(splitmix64(
        hash_key({seed, 0xe1711ULL, static_cast<std::uint64_t>(role_index_), c})));
  }

  bool operator==(const EpisodeState& o) const {
    return task == o.task && team == o.team && slot_owner == o.slot_owner &&
           slots == o.slots && rail == o.rail && memories == o.memories &&
           receipts == o.receipts && turn == o.turn &&
           ticks_elapsed == o.ticks_elapsed && token_count == o.token_count &&
           budgets == o.budgets && seed == o.seed &&
           env_draw_counters == o.env_draw_counters && terminal == o.terminal &&
           current_speaker == o.current_speaker &&
           consecutive_turns == o.consecutive_turns &&
           consecutive_handoffs == o.consecutive_handoffs &&
           violation_count == o.violation_count &&
           unsafe_event_count == o.unsafe_event_count &&
           redundant_count == o.redundant_count &&
           conflict_count == o.conflict_count &&
           draft_sequence == o.draft_sequence;
  }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

inline EpisodeState new_episode(const TaskSpec& task,
                                const std::vector<std::string>& team,
                                std::uint64_t seed, const EnvConfig& cfg = {}) {
  if (team.empty()) throw std::invalid_argument("new_episode: team must be non-empty");
  task.validate();
  cfg.validate();

  EpisodeState st;
  st.task = task;
  st.team = team;
  st.seed = seed;
  st.config = cfg;
  st.slots.assign(task.slot_count, SlotState{});
  st.memories.resize(team.size());
  st.env_draw_counters.assign(team.size(), 0);

  // Drafting roles own slots round-robin; with no designated drafter the
  // whole team shares ownership so every task stays completable.
  std::vector<int> drafters;
  const char* specialist =
      task.task_family == TaskFamily::writing ? "writer" : "coder";
  for (int i = 0; i < static_cast<int>(team.size()); ++i)
    if (team[i] == specialist || team[i] == "solo") drafters.push_back(i);
  if (drafters.empty())
    for (int i = 0; i < static_cast<int>(team.size()); ++i) drafters.push_back(i);
  st.slot_owner.resize(task.slot_count);
  for (int s = 0; s < task.slot_count; ++s)
    st.slot_owner[s] = drafters[s % drafters.size()];

  for (int i = 0; i < static_cast<int>(team.size()); ++i) {
    st.memories[i].role = team[i];
    st.memories[i].notes_size = 0;
  }
  for (int s = 0; s < task.slot_count; ++s)
    st.memories[st.slot_owner[s]].checklist.insert(s);

  st.budgets.ticks_remaining = task.tick_budget;
  st.budgets.turns_remaining = task.max_turns;
  st.budgets.message_tokens_remaining.assign(team.size(),
                                             cfg.guards.message_budget_per_role);
  return st;
}

inline std::optional<TerminationReason> check_termination(const EpisodeState& st) {
  if (st.terminal) return st.terminal;
  if (st.turn >= st.task.max_turns || st.ticks_elapsed >= st.task.tick_budget)
    return TerminationReason::Timeout;
  return std::nullopt;
}

namespace detail {

// Latest receipt for (tool, slot) issued at-or-after the slot's last
// content change; stale receipts do not count as evidence.
inline const ToolReceipt* fresh_receipt(const EpisodeState& st, Verb tool, int slot) {
  const ToolReceipt* found = nullptr;
  for (const ToolReceipt& r : st.receipts) {
    if (r.tool != tool || r.slot != slot) continue;
    if (r.turn_issued < st.slots[slot].last_change_turn) continue;
    if (!found || r.turn_issued >= found->turn_issued) found = &r;
  }
  return found;
}

inline bool slot_flawed(const EpisodeState& st, int slot) {
  const SlotState& s = st.slots[slot];
  if (slot_tier(s.status) == 0) return false;
  if (s.unanchored || !s.drafted_in_order) return true;
  return s.terminology_tag != st.task.hidden_target[slot].terminology_tag;
}

// Next slot the owner should draft: plan order once frozen, index order
// otherwise.
inline int next_draft_slot(const EpisodeState& st, int role_index) {
  int best = -1, best_key = 1 << 30;
  for (int s = 0; s < st.task.slot_count; ++s) {
    if (st.slot_owner[s] != role_index) continue;
    if (st.slots[s].status != SlotStatus::Empty) continue;
    int key = st.rail.scope_frozen() ? st.task.hidden_target[s].order_index : s;
    if (key < best_key) {
      best_key = key;
      best = s;
    }
  }
  return best;
}

inline int first_failing_assertion(const ToolReceipt& r) {
  for (int i = 0; i < static_cast<int>(r.assertion_pass.size()); ++i)
    if (!r.assertion_pass[i]) return i;
  return -1;
}

}  // namespace detail

// Deterministic tool execution. Appends a receipt; the apply_action path
// is the only caller that also charges ticks and advances the turn.
inline const ToolReceipt& run_tool(EpisodeState& st, Verb tool, int slot) {
  if (slot < 0 || slot >= st.task.slot_count)
    throw std::invalid_argument("run_tool: slot out of range");
  const SlotState& s = st.slots[slot];
  if (tool == Verb::Test && slot_tier(s.status) == 0)
    throw std::invalid_argument("run_tool: Test requires a drafted slot");
  if (tool != Verb::Lint && tool != Verb::Test)
    throw std::invalid_argument("run_tool: tool must be Lint or Test");

  ToolReceipt r;
  r.tool = tool;
  r.slot = slot;
  r.tick_cost = st.config.tick_cost(tool);
  r.turn_issued = st.turn;
  if (tool == Verb::Lint) {
    if (slot_tier(s.status) >= 1) {
      int target_tag = st.task.hidden_target[slot].terminology_tag;
      int mismatches = s.terminology_tag != target_tag ? 1 : 0;
      int unanchored = s.unanchored ? 1 : 0;
      int order_bad = s.drafted_in_order ? 0 : 1;
      r.lint_violations = mismatches + unanchored + order_bad;
      r.fixable_violations = st.rail.term_frozen() ? mismatches + unanchored : 0;
    }
  } else {
    const auto& difficulties = st.task.hidden_target[slot].assertion_difficulties;
    r.assertion_pass.resize(difficulties.size());
    r.assertion_margins.resize(difficulties.size());
    double q = s.impl_quality < 0.0 ? 0.0 : s.impl_quality;
    for (size_t j = 0; j < difficulties.size(); ++j) {
      AssertionState a;
      if (j < s.assertions.size()) a = s.assertions[j];
      bool pass = a.repaired || (s.impl_quality >= 0.0 && q >= difficulties[j]);
      r.assertion_pass[j] = pass;
      if (pass) {
        r.assertion_margins[j] = 0.0;
      } else {
        double d = std::max(difficulties[j], 1e-9);
        double m = std::min(1.0, std::max(0.0, (difficulties[j] - q) / d));
        r.assertion_margins[j] = std::min(1.0, m * a.margin_factor);
      }
    }
  }
  st.receipts.push_back(r);
  return st.receipts.back();
}

inline QualityBreakdown quality_score(const EpisodeState& st) {
  QualityBreakdown q;
  const int n = st.task.slot_count;
  if (st.task.task_family == TaskFamily::writing) {
    int drafted = 0, in_order = 0, tag_ok = 0;
    for (int s = 0; s < n; ++s) {
      const SlotState& slot = st.slots[s];
      if (slot_tier(slot.status) == 0) continue;
      ++drafted;
      if (slot.drafted_while_frozen && slot.drafted_in_order) ++in_order;
      int target = st.rail.term_frozen() ? st.rail.frozen_tag()
                                         : st.task.hidden_target[s].terminology_tag;
      if (!slot.unanchored && slot.terminology_tag == target) ++tag_ok;
    }
    q.structure = static_cast<double>(in_order) / n;
    q.style = drafted == 0 ? 0.0 : static_cast<double>(tag_ok) / drafted;
    q.overall = 0.5 * (q.structure + q.style);
  } else {
    int total = st.task.total_assertions();
    double credit = 0.0;
    for (int s = 0; s < n; ++s) {
      const SlotState& slot = st.slots[s];
      const auto& difficulties = st.task.hidden_target[s].assertion_difficulties;
      for (size_t j = 0; j < difficulties.size(); ++j) {
        if (slot.impl_quality < 0.0) continue;  // unimplemented: margin 1, credit 0
        const AssertionState& a = slot.assertions[j];
        double qv = slot.impl_quality;
        if (a.repaired || qv >= difficulties[j]) {
          credit += 1.0;
        } else {
          double d = std::max(difficulties[j], 1e-9);
          double m = std::min(1.0, std::max(0.0, (difficulties[j] - qv) / d) *
                                       a.margin_factor);
          credit += (1.0 - m) * st.config.partial_credit_factor;
        }
      }
    }
    q.pass_fraction = total == 0 ? 0.0 : credit / total;
    q.overall = q.pass_fraction;
  }
  return q;
}

inline std::vector<ActionPrimitive> legal_actions(const EpisodeState& st,
                                                  const std::string& role) {
  if (st.terminal) throw std::logic_error("legal_actions: episode is terminal");
  int ri = st.role_index(role);
  if (ri < 0) throw std::invalid_argument("legal_actions: unknown role " + role);

  const bool coding = st.task.task_family == TaskFamily::coding;
  const bool has_floor = ri == st.current_speaker;
  HandoffSignal signal =
      has_floor ? tick_handoff_clock(st.consecutive_turns, st.config.guards)
                : HandoffSignal::none;

  std::vector<ActionPrimitive> out;
  auto add = [&](ActionPrimitive a) {
    if (!is_suppressed(st.suppressions, st.turn, ri, a.verb, a.target_slot))
      out.push_back(std::move(a));
  };

  // Integrate: lowest-index drafted-tier slot, any role.
  int integ_slot = -1;
  for (int s = 0; s < st.task.slot_count; ++s)
    if (slot_tier(st.slots[s].status) == 1) {
      integ_slot = s;
      break;
    }

  if (signal == HandoffSignal::forced_handoff) {
    // Clock expired: yield, or land one integration on the way out.
    if (integ_slot >= 0) {
      ActionPrimitive integ;
      integ.verb = Verb::Integrate;
      integ.target_slot = integ_slot;
      add(integ);
    }
    ActionPrimitive h;
    h.verb = Verb::Handoff;
    out.push_back(std::move(h));  // never suppressed; keeps the set non-empty
    return out;
  }

  {
    ActionPrimitive plan;
    plan.verb = Verb::Plan;
    plan.proposed_order.resize(st.task.slot_count);
    for (int s = 0; s < st.task.slot_count; ++s)
      plan.proposed_order[st.task.hidden_target[s].order_index] = s;
    plan.proposed_tag = st.task.hidden_target.empty()
                            ? 0
                            : st.task.hidden_target[0].terminology_tag;
    add(std::move(plan));
  }

  int draft_slot = detail::next_draft_slot(st, ri);
  if (draft_slot >= 0) {
    ActionPrimitive d;
    d.verb = coding ? Verb::Implement : Verb::DraftSection;
    d.target_slot = draft_slot;
    add(std::move(d));
  }

  {
    int target = -1;
    for (int s = 0; s < st.task.slot_count; ++s)
      if (st.slot_owner[s] == ri && detail::slot_flawed(st, s)) {
        target = s;
        break;
      }
    if (target < 0)
      for (int s = 0; s < st.task.slot_count; ++s)
        if (st.slot_owner[s] == ri && slot_tier(st.slots[s].status) >= 1) {
          target = s;
          break;
        }
    if (target >= 0) {
      ActionPrimitive pc;
      pc.verb = Verb::ProposeChange;
      pc.target_slot = target;
      add(std::move(pc));
    }
  }

  if (integ_slot >= 0) {
    ActionPrimitive integ;
    integ.verb = Verb::Integrate;
    integ.target_slot = integ_slot;
    add(std::move(integ));
  }

  {
    // Lint the first slot lacking fresh lint feedback, else re-lint the
    // most recently changed slot.
    int target = -1, fallback = -1, fallback_turn = -1;
    for (int s = 0; s < st.task.slot_count; ++s) {
      if (slot_tier(st.slots[s].status) < 1) continue;
      if (!detail::fresh_receipt(st, Verb::Lint, s) && target < 0) target = s;
      if (st.slots[s].last_change_turn >= fallback_turn) {
        fallback_turn = st.slots[s].last_change_turn;
        fallback = s;
      }
    }
    if (target < 0) target = fallback;
    if (target >= 0) {
      ActionPrimitive lint;
      lint.verb = Verb::Lint;
      lint.target_slot = target;
      add(std::move(lint));
    }
  }

  if (coding) {
    int target = -1, fallback = -1, fallback_turn = -1;
    for (int s = 0; s < st.task.slot_count; ++s) {
      if (slot_tier(st.slots[s].status) < 1) continue;
      if (!detail::fresh_receipt(st, Verb::Test, s) && target < 0) target = s;
      if (st.slots[s].last_change_turn >= fallback_turn) {
        fallback_turn = st.slots[s].last_change_turn;
        fallback = s;
      }
    }
    if (target < 0) target = fallback;
    if (target >= 0) {
      ActionPrimitive test;
      test.verb = Verb::Test;
      test.target_slot = target;
      add(std::move(test));
    }
  }

  {
    // Repair needs fresh failing evidence on an owned slot.
    for (int s = 0; s < st.task.slot_count; ++s) {
      if (st.slot_owner[s] != ri) continue;
      const ToolReceipt* test = detail::fresh_receipt(st, Verb::Test, s);
      if (test) {
        int a = detail::first_failing_assertion(*test);
        if (a >= 0 && !st.slots[s].assertions[a].repaired) {
          ActionPrimitive rep;
          rep.verb = Verb::Repair;
          rep.target_slot = s;
          rep.failing_assertion = a;
          add(std::move(rep));
          break;
        }
      }
      const ToolReceipt* lint = detail::fresh_receipt(st, Verb::Lint, s);
      if (lint && lint->fixable_violations > 0) {
        ActionPrimitive rep;
        rep.verb = Verb::Repair;
        rep.target_slot = s;
        add(std::move(rep));
        break;
      }
    }
  }

  {
    bool gate;
    if (coding) {
      gate = true;
      for (int s = 0; s < st.task.slot_count; ++s)
        if (!st.slots[s].tested_once) gate = false;
    } else {
      gate = true;
      for (int s = 0; s < st.task.slot_count; ++s)
        if (st.slots[s].status != SlotStatus::Integrated) gate = false;
    }
    if (gate) {
      ActionPrimitive fin;
      fin.verb = Verb::Finalize;
      add(std::move(fin));
    }
  }

  {
    ActionPrimitive h;
    h.verb = Verb::Handoff;
    out.push_back(std::move(h));
  }
  return out;
}

inline Observation observe(const EpisodeState& st, const std::string& role) {
  if (st.terminal) throw std::logic_error("observe: episode is terminal");
  int ri = st.role_index(role);
  if (ri < 0) throw std::invalid_argument("observe: unknown role " + role);

  Observation obs;
  obs.role = role;
  obs.role_index = ri;
  obs.brief_digest = {st.task.task_family, st.task.difficulty, st.task.slot_count,
                      st.task.max_turns, st.task.tick_budget};
  for (int s = 0; s < st.task.slot_count; ++s) {
    ++obs.slot_histogram[static_cast<int>(st.slots[s].status)];
    if (st.slot_owner[s] != ri) continue;
    if (static_cast<int>(obs.artifact_slice.size()) >= st.config.observation_slice_cap)
      break;
    SlotView v;
    v.slot = s;
    v.status = st.slots[s].status;
    v.terminology_tag = st.slots[s].terminology_tag;
    v.order_drafted = st.slots[s].order_drafted;
    v.unsafe_marker = st.task.hidden_target[s].unsafe_marker;
    v.assertion_count =
        static_cast<int>(st.task.hidden_target[s].assertion_difficulties.size());
    if (const ToolReceipt* r = detail::fresh_receipt(st, Verb::Test, s)) {
      for (bool p : r->assertion_pass)
        if (!p) ++v.failing_assertions;
    }
    obs.artifact_slice.push_back(v);
  }

  int r_window = st.config.rail_digest_window;
  int n_rail = static_cast<int>(st.rail.decisions.size());
  for (int i = std::max(0, n_rail - r_window); i < n_rail; ++i)
    obs.rail_digest.push_back(st.rail.decisions[i]);

  obs.own_memory = st.memories[ri];
  obs.remaining_budget = {st.budgets.turns_remaining, st.budgets.ticks_remaining,
                          st.budgets.message_tokens_remaining[ri]};
  obs.scope_frozen = st.rail.scope_frozen();
  obs.term_frozen = st.rail.term_frozen();
  obs.has_floor = ri == st.current_speaker;
  obs.consecutive_turns = obs.has_floor ? st.consecutive_turns : 0;
  obs.nudge = obs.has_floor &&
              tick_handoff_clock(st.consecutive_turns, st.config.guards) !=
                  HandoffSignal::none;

  for (int s = 0; s < st.task.slot_count; ++s) {
    const ToolReceipt* test = detail::fresh_receipt(st, Verb::Test, s);
    const ToolReceipt* lint = detail::fresh_receipt(st, Verb::Lint, s);
    bool failing = (test && detail::first_failing_assertion(*test) >= 0) ||
                   (lint && lint->fixable_violations > 0);
    if (failing) {
      ++obs.failing_receipt_count;
      if (st.slot_owner[s] == ri) obs.own_failing_evidence = true;
    }
    if (st.slot_owner[s] == ri) {
      if (st.slots[s].status == SlotStatus::Empty) obs.own_empty_slot = true;
      if (detail::slot_flawed(st, s)) obs.own_flawed_slot = true;
    }
  }

  obs.finalize_ready = true;
  for (int s = 0; s < st.task.slot_count; ++s) {
    if (st.task.task_family == TaskFamily::coding) {
      if (!st.slots[s].tested_once) obs.finalize_ready = false;
    } else if (st.slots[s].status != SlotStatus::Integrated) {
      obs.finalize_ready = false;
    }
  }
  return obs;
}

// Applies one action for the floor-holding role. Illegal actions are
// absorbed as schema violations: the turn advances, the artifact does not.
inline StepLog apply_action(EpisodeState& st, const std::string& role,
                            const ActionPrimitive& action) {
  if (st.terminal) throw std::logic_error("apply_action: episode is terminal");
  int ri = st.role_index(role);
  if (ri < 0) throw std::invalid_argument("apply_action: unknown role " + role);
  if (ri != st.current_speaker)
    throw std::logic_error("apply_action: role does not hold the floor");

  StepLog log;
  log.turn = st.turn;
  log.role_index = ri;
  log.role = role;
  log.verb = action.verb;
  log.target_slot = action.target_slot;

  HandoffSignal signal = tick_handoff_clock(st.consecutive_turns, st.config.guards);
  log.forced_handoff = signal == HandoffSignal::forced_handoff;

  bool legal = false;
  for (const ActionPrimitive& a : legal_actions(st, role))
    if (a == action) {
      legal = true;
      break;
    }

  SafetyVerdict verdict;
  std::vector<bool> markers(st.task.slot_count);
  for (int s = 0; s < st.task.slot_count; ++s)
    markers[s] = st.task.hidden_target[s].unsafe_marker;
  if (legal) verdict = safety_screen(action.verb, action.target_slot, markers);

  int payload = 0;
  int over_budget = 0;
  BudgetDecision budget_decision = BudgetDecision::allow;
  bool deny_for_budget = false;
  if (legal && verdict.allowed &&
      (action.verb == Verb::DraftSection || action.verb == Verb::Implement)) {
    payload = static_cast<int>(st.env_draw(ri) *
                               (st.config.draft_tokens_max -
                                st.config.draft_tokens_min + 1)) +
              st.config.draft_tokens_min;
    budget_decision = check_message_budget(st.budgets, ri, payload);
    if (budget_decision == BudgetDecision::truncate) {
      over_budget = payload - st.budgets.message_tokens_remaining[ri];
      payload = st.budgets.message_tokens_remaining[ri];
    } else if (budget_decision == BudgetDecision::deny) {
      deny_for_budget = true;
      payload = 0;
    }
  }

  bool absorbed = !legal || !verdict.allowed || deny_for_budget;
  if (!legal || deny_for_budget) {
    log.schema_violation = true;
    ++st.violation_count;
  }
  if (!verdict.allowed) {
    log.unsafe_tool = true;
    ++st.unsafe_event_count;
  }

  int tick_cost = absorbed ? 1 : st.config.tick_cost(action.verb);
  int tokens = absorbed ? 0 : st.config.base_token_cost(action.verb) + payload;
  log.ticks_cost = tick_cost;
  log.tokens_spent = tokens;
  log.tokens_over_budget = over_budget;
  log.applied = !absorbed;

  if (!absorbed) {
    SlotState* slot =
        action.target_slot >= 0 ? &st.slots[action.target_slot] : nullptr;
    switch (action.verb) {
      case Verb::Plan: {
        if (!st.rail.scope_frozen()) {
          DecisionRecord scope;
          scope.kind = DecisionKind::ScopeFrozen;
          scope.turn = st.turn;
          scope.order = action.proposed_order;
          st.rail.decisions.push_back(scope);
          DecisionRecord term;
          term.kind = DecisionKind::TermFrozen;
          term.turn = st.turn;
          term.tag = action.proposed_tag;
          st.rail.decisions.push_back(term);
          log.rail_appends = 2;
          log.novel_effect = true;
        }
        st.memories[ri].notes_size += 5;
        break;
      }
      case Verb::DraftSection:
      case Verb::Implement: {
        RoleSkill skill = role_skill(role, st.task.task_family, st.config);
        double p = std::min(st.config.max_success_prob,
                            skill.draft + (st.rail.scope_frozen()
                                               ? st.config.plan_bonus
                                               : 0.0));
        double roll = st.env_draw(ri);
        if (roll < p) {
          bool in_order = true;
          for (int s2 = 0; s2 < st.task.slot_count; ++s2)
            if (st.task.hidden_target[s2].order_index <
                    st.task.hidden_target[action.target_slot].order_index &&
                slot_tier(st.slots[s2].status) == 0)
              in_order = false;
          slot->status = SlotStatus::Drafted;
          slot->order_drafted = st.draft_sequence++;
          slot->drafted_while_frozen = st.rail.scope_frozen();
          slot->drafted_in_order = in_order && st.rail.scope_frozen();
          slot->unanchored = !st.rail.term_frozen();
          slot->drafted_by_role = ri;
          slot->drafted_turn = st.turn;
          slot->last_change_turn = st.turn;
          // Terminology: copy the frozen tag (with specialist adherence),
          // otherwise guess uniformly.
          int target_tag = st.rail.term_frozen()
                               ? st.rail.frozen_tag()
                               : st.task.hidden_target[action.target_slot]
                                     .terminology_tag;
          if (st.rail.term_frozen()) {
            double adhere = st.env_draw(ri);
            if (adhere < skill.tag_adherence) {
              slot->terminology_tag = target_tag;
            } else {
              int off = 1 + static_cast<int>(st.env_draw(ri) * (kTagCount - 1));
              slot->terminology_tag = (target_tag + off) % kTagCount;
            }
          } else {
            slot->terminology_tag =
                static_cast<int>(st.env_draw(ri) * kTagCount) % kTagCount;
          }
          slot->tag_set_turn = st.turn;
          slot->tag_set_role = ri;
          if (action.verb == Verb::Implement) {
            double noise = (st.env_draw(ri) * 2.0 - 1.0) * st.config.impl_quality_noise;
            double q = skill.draft +
                       (st.rail.scope_frozen() ? st.config.plan_bonus : 0.0) +
                       noise;
            slot->impl_quality = std::min(1.0, std::max(0.0, q));
            slot->assertions.assign(
                st.task.hidden_target[action.target_slot].assertion_difficulties.size(),
                AssertionState{});
            for (auto& a : slot->assertions) {
              a.last_touch_turn = st.turn;
              a.last_touch_role = ri;
            }
          }
          st.memories[ri].checklist.erase(action.target_slot);
          log.novel_effect = true;
          log.drafted_in_order = slot->drafted_in_order;
          log.tag_assigned = slot->terminology_tag;
        } else {
          log.attempt_failed = true;
        }
        st.memories[ri].notes_size += payload / 10;
        break;
      }
      case Verb::ProposeChange: {
        log.conflict_reopen = slot->status == SlotStatus::Integrated;
        if (log.conflict_reopen) ++st.conflict_count;
        *slot = SlotState{};
        slot->last_change_turn = st.turn;
        DecisionRecord rec;
        rec.kind = DecisionKind::ChangeAccepted;
        rec.turn = st.turn;
        rec.slot = action.target_slot;
        st.rail.decisions.push_back(rec);
        log.rail_appends = 1;
        log.novel_effect = true;
        st.memories[st.slot_owner[action.target_slot]].checklist.insert(
            action.target_slot);
        break;
      }
      case Verb::Integrate: {
        slot->status = SlotStatus::Integrated;
        log.novel_effect = true;
        st.memories[st.slot_owner[action.target_slot]].checklist.erase(
            action.target_slot);
        break;
      }
      case Verb::Lint:
      case Verb::Test: {
        const ToolReceipt* prior = detail::fresh_receipt(st, action.verb,
                                                         action.target_slot);
        const ToolReceipt& r = run_tool(st, action.verb, action.target_slot);
        log.receipt_index = static_cast<int>(st.receipts.size()) - 1;
        bool duplicate = prior && prior->lint_violations == r.lint_violations &&
                         prior->fixable_violations == r.fixable_violations &&
                         prior->assertion_pass == r.assertion_pass &&
                         prior->assertion_margins == r.assertion_margins;
        log.novel_effect = !duplicate;
        if (action.verb == Verb::Test) {
          slot->tested_once = true;
          if (slot->status != SlotStatus::Integrated)
            slot->status =
                r.any_failing() ? SlotStatus::Failing : SlotStatus::Passing;
        }
        break;
      }
      case Verb::Repair: {
        RoleSkill skill = role_skill(role, st.task.task_family, st.config);
        double roll = st.env_draw(ri);
        if (action.failing_assertion >= 0) {
          AssertionState& a = slot->assertions[action.failing_assertion];
          if (roll < skill.repair) {
            a.repaired = true;
            log.novel_effect = true;
          } else {
            a.margin_factor *= st.config.repair_margin_decay;
            log.attempt_failed = true;
          }
          a.last_touch_turn = st.turn;
          a.last_touch_role = ri;
          slot->last_change_turn = st.turn;
        } else {
          if (roll < skill.repair) {
            slot->terminology_tag = st.rail.frozen_tag();
            slot->unanchored = false;
            slot->tag_set_turn = st.turn;
            slot->tag_set_role = ri;
            log.novel_effect = true;
            log.tag_assigned = slot->terminology_tag;
          } else {
            log.attempt_failed = true;
          }
          slot->last_change_turn = st.turn;
        }
        st.memories[ri].notes_size += 3;
        break;
      }
      case Verb::Finalize: {
        st.terminal = TerminationReason::Finalized;
        log.novel_effect = true;
        log.terminal_action = true;
        break;
      }
      case Verb::Handoff:
        break;
    }
  }

  // Redundant-turn detection: a non-handoff, non-terminal turn that
  // advanced nothing and produced no new evidence.
  bool redundant = !log.novel_effect && !log.terminal_action &&
                   !log.schema_violation && !log.unsafe_tool &&
                   !log.attempt_failed && action.verb != Verb::Handoff;
  if (redundant) ++st.redundant_count;

  // Clocks, budgets, floor.
  st.turn += 1;
  st.ticks_elapsed = std::min(st.task.tick_budget, st.ticks_elapsed + tick_cost);
  st.token_count += tokens;
  st.budgets.turns_remaining = std::max(0, st.budgets.turns_remaining - 1);
  st.budgets.ticks_remaining = std::max(0, st.budgets.ticks_remaining - tick_cost);
  st.budgets.message_tokens_remaining[ri] =
      std::max(0, st.budgets.message_tokens_remaining[ri] - payload);

  bool was_handoff = !absorbed && action.verb == Verb::Handoff;
  if (was_handoff) {
    st.consecutive_handoffs += 1;
  } else {
    st.consecutive_handoffs = 0;
  }

  st.coach.push(log, st.config.guards.coach_window);
  Intervention iv;
  if (coach_intervene(st.coach, st.config.guards, &iv)) {
    Suppression sup;
    sup.role_index = iv.role_index;
    sup.verb = iv.verb;
    sup.target_slot = iv.target_slot;
    sup.until_turn = st.turn + st.config.guards.coach_cooldown;
    st.suppressions.push_back(sup);
    DecisionRecord rec;
    rec.kind = DecisionKind::BlockerRaised;
    rec.turn = st.turn - 1;
    rec.slot = iv.target_slot;
    st.rail.decisions.push_back(rec);
    st.coach.interventions_issued += 1;
    st.coach.window.clear();
    log.coach_intervention = true;
  }

  if (was_handoff) {
    st.current_speaker = (st.current_speaker + 1) % static_cast<int>(st.team.size());
    st.consecutive_turns = 0;
  } else {
    st.consecutive_turns += 1;
    if (st.consecutive_turns >= st.config.guards.handoff_force_after) {
      st.current_speaker =
          (st.current_speaker + 1) % static_cast<int>(st.team.size());
      st.consecutive_turns = 0;
    }
  }

  if (!st.terminal && was_handoff &&
      st.consecutive_handoffs >= static_cast<int>(st.team.size())) {
    st.terminal = TerminationReason::Handoff;
    log.terminal_action = true;
  }
  if (!st.terminal && (st.turn >= st.task.max_turns ||
                       st.ticks_elapsed >= st.task.tick_budget)) {
    st.terminal = TerminationReason::Timeout;
  }
  return log;
}

}  // namespace teamrl

#endif  // TEAMRL_ENV_HPP_
