// Portable deterministic RNG. All randomness in the project flows from a
// single root seed through sub_seed(root, purpose[, index]).
#pragma once

#include <cstdint>
#include <string_view>

namespace rfdet {

inline uint64_t splitmix64_next(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Documented sub-seed derivation:
//   sub_seed(root, purpose)        = splitmix64(root ^ fnv1a64(purpose))
//   sub_seed(root, purpose, index) = splitmix64(sub_seed(root, purpose)
//                                               ^ (0x9e3779b97f4a7c15 * (index + 1)))
inline uint64_t sub_seed(uint64_t root, std::string_view purpose) {
  uint64_t s = root ^ fnv1a64(purpose);
  return splitmix64_next(s);
}
inline uint64_t sub_seed(uint64_t root, std::string_view purpose, uint64_t index) {
  uint64_t s = sub_seed(root, purpose) ^ (0x9e3779b97f4a7c15ULL * (index + 1));
  return splitmix64_next(s);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next() { return splitmix64_next(state_); }

  // Uniform in [0, 1), 53 mantissa bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int64_t>(next() % span);
  }

 private:
  uint64_t state_;
};

}  // namespace rfdet
