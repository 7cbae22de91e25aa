#ifndef TEAMRL_RNG_HPP_
#define TEAMRL_RNG_HPP_

#include <cstdint>
#include <initializer_list>

namespace teamrl {

// Counter-based pseudo-randomness. Every draw is a pure hash of
// (seed, stream tag, counter), so replaying a prefix of an episode and
// forking counterfactual branches never perturbs unrelated streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  return splitmix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

inline std::uint64_t hash_key(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x2545f4914f6cdd1dULL;
  for (std::uint64_t p : parts) h = hash_combine(h, p);
  return h;
}

inline double u64_to_unit(std::uint64_t x) {
  // 53 mantissa bits -> [0, 1)
  return static_cast<double>(x >> 11) * (1.0 / 9007199254740992.0);
}

// One named stream: successive draws advance a private counter.
class Rng {
 public:
  Rng() : key_(0), counter_(0) {}
  explicit Rng(std::uint64_t key) : key_(key), counter_(0) {}
  Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags)
      : key_(hash_combine(seed, hash_key(tags))), counter_(0) {}

  std::uint64_t next_u64() { return splitmix64(hash_combine(key_, counter_++)); }

  double uniform01() { return u64_to_unit(next_u64()); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_range(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(uniform_int(
                    static_cast<std::uint64_t>(hi - lo + 1)));
  }

  double uniform_range(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  // Derive an independent stream without disturbing this one.
  Rng fork(std::uint64_t tag) const { return Rng(hash_combine(key_, splitmix64(tag ^ 0x8f1bbcdcbfa53e0bULL))); }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t c) { counter_ = c; }

  bool operator==(const Rng& o) const = default;

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

// Fisher-Yates permutation of 0..n-1.
inline void seeded_permutation(Rng& rng, int n, int* out) {
  for (int i = 0; i < n; ++i) out[i] = i;
  for (int i = n - 1; i > 0; --i) {
    int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i + 1)));
    int tmp = out[i];
    out[i] = out[j];
    out[j] = tmp;
  }
}

}  // namespace teamrl

#endif  // TEAMRL_RNG_HPP_
