#ifndef TEAMRL_TASK_HPP_
#define TEAMRL_TASK_HPP_

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "teamrl/rng.hpp"

namespace teamrl {

enum class TaskFamily : int { writing = 0, coding = 1 };
enum class Difficulty : int { easy = 0, medium = 1, hard = 2 };

inline const char* family_name(TaskFamily f) {
  return f == TaskFamily::writing ? "writing" : "coding";
}
inline const char* difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return "easy";
    case Difficulty::medium: return "medium";
    default: return "hard";
  }
}

inline constexpr int kTagCount = 4;  // terminology tag vocabulary

// Hidden per-slot target: required position in the outline, the
// terminology tag the brief implies, and (coding) assertion difficulties.
struct SlotTarget {
  int order_index = 0;
  int terminology_tag = 0;
  std::vector<double> assertion_difficulties;  // coding only, each in [0,1]
  bool unsafe_marker = false;  // synthetic high-risk flag for the safety filter

  bool operator==(const SlotTarget& o) const = default;
};

struct TaskSpec {
  TaskFamily task_family = TaskFamily::writing;
  Difficulty difficulty = Difficulty::easy;
  int slot_count = 1;
  std::vector<SlotTarget> hidden_target;   // size == slot_count
  std::vector<int> retrieval_pool;         // static fact ids
  std::string brief_text_id;
  int max_turns = 24;
  int tick_budget = 64;

  int total_assertions() const {
    int n = 0;
    for (const auto& t : hidden_target)
      n += static_cast<int>(t.assertion_difficulties.size());
    return n;
  }

  void validate() const {
    if (slot_count < 1) throw std::invalid_argument("TaskSpec: slot_count must be >= 1");
    if (tick_budget <= 0) throw std::invalid_argument("TaskSpec: tick_budget must be > 0");
    if (max_turns <= 0) throw std::invalid_argument("TaskSpec: max_turns must be > 0");
    if (static_cast<int>(hidden_target.size()) != slot_count)
      throw std::invalid_argument("TaskSpec: hidden_target size != slot_count");
    std::vector<int> seen(slot_count, 0);
    for (const auto& t : hidden_target) {
      if (t.order_index < 0 || t.order_index >= slot_count || seen[t.order_index]++)
        throw std::invalid_argument("TaskSpec: order indices must form a permutation");
      for (double d : t.assertion_difficulties)
        if (d < 0.0 || d > 1.0)
          throw std::invalid_argument("TaskSpec: assertion difficulty outside [0,1]");
    }
  }

  bool operator==(const TaskSpec& o) const = default;
};

struct TaskGenOptions {
  double unsafe_slot_prob = 0.05;  // chance a task carries one flagged slot
  int assertions_min = 2;
  int assertions_max = 4;
};

// Deterministic synthetic task generator.
inline TaskSpec make_task(TaskFamily family, Difficulty difficulty, int slot_count,
                          int max_turns, std::uint64_t task_seed,
                          const TaskGenOptions& opt = {}) {
  TaskSpec spec;
  spec.task_family = family;
  spec.difficulty = difficulty;
  spec.slot_count = slot_count;
  spec.max_turns = max_turns;
  spec.tick_budget = max_turns * 3;
  Rng rng(task_seed, {0x7a51u, static_cast<std::uint64_t>(family),
                      static_cast<std::uint64_t>(difficulty),
                      static_cast<std::uint64_t>(slot_count)});

  std::vector<int> order(slot_count);
  seeded_permutation(rng, slot_count, order.data());
  int brief_tag = static_cast<int>(rng.uniform_int(kTagCount));

  double d_lo = 0.05, d_hi = 0.55;
  if (difficulty == Difficulty::medium) { d_lo = 0.10; d_hi = 0.75; }
  if (difficulty == Difficulty::hard) { d_lo = 0.20; d_hi = 0.92; }

  spec.hidden_target.resize(slot_count);
  for (int s = 0; s < slot_count; ++s) {
    SlotTarget& t = spec.hidden_target[s];
    t.order_index = order[s];
    t.terminology_tag = brief_tag;
    if (family == TaskFamily::coding) {
      int n = static_cast<int>(
          rng.uniform_range(static_cast<std::int64_t>(opt.assertions_min),
                            static_cast<std::int64_t>(opt.assertions_max)));
      t.assertion_difficulties.resize(n);
      for (double& d : t.assertion_difficulties) d = rng.uniform_range(d_lo, d_hi);
    }
  }
  if (opt.unsafe_slot_prob > 0.0 && rng.uniform01() < opt.unsafe_slot_prob) {
    int s = static_cast<int>(rng.uniform_int(slot_count));
    spec.hidden_target[s].unsafe_marker = true;
  }

  int pool = 4 + 2 * static_cast<int>(difficulty);
  spec.retrieval_pool.resize(pool);
  for (int i = 0; i < pool; ++i)
    spec.retrieval_pool[i] = static_cast<int>(rng.uniform_int(1000));

  std::ostringstream id;
  id << family_name(family) << "-" << difficulty_name(difficulty) << "-" << task_seed;
  spec.brief_text_id = id.str();
  spec.validate();
  return spec;
}

// --- key = value config files -------------------------------------------

// Parses "key = value" lines; '#' starts a comment; blank lines ignored.
inline std::map<std::string, std::string> parse_kv_text(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline std::map<std::string, std::string> parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  return parse_kv_text(in);
}

// Task spec from a key=value map (used by the CLI for fixture tasks).
inline TaskSpec task_from_kv(const std::map<std::string, std::string>& kv) {
  auto get = [&](const std::string& k, const std::string& dflt) {
    auto it = kv.find(k);
    return it == kv.end() ? dflt : it->second;
  };
  TaskFamily fam = get("task_family", "writing") == "coding" ? TaskFamily::coding
                                                             : TaskFamily::writing;
  std::string ds = get("difficulty", "easy");
  Difficulty dif = ds == "hard" ? Difficulty::hard
                    : ds == "medium" ? Difficulty::medium : Difficulty::easy;
  int slots = std::stoi(get("slot_count", "3"));
  int turns = std::stoi(get("max_turns", "24"));
  std::uint64_t seed = std::stoull(get("task_seed", "1"));
  TaskGenOptions opt;
  opt.unsafe_slot_prob = std::stod(get("unsafe_slot_prob", "0.05"));
  TaskSpec spec = make_task(fam, dif, slots, turns, seed, opt);
  if (kv.count("tick_budget")) spec.tick_budget = std::stoi(kv.at("tick_budget"));
  spec.validate();
  return spec;
}

}  // namespace teamrl

#endif  // TEAMRL_TASK_HPP_
