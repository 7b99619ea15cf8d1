#pragma once

// Deterministic randomness. Every sampled quantity in the project goes
// through Rng, which maps raw mt19937_64 output to uniforms itself:
// std::uniform_*_distribution sequences are implementation-defined and
// would break the byte-identical reproducibility contract.

#include <cstdint>
#include <cstring>
#include <random>
#include <string>
#include <vector>

namespace dvt {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Child-seed derivation, e.g. per-scene, per-epoch, per-sequence streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  return splitmix64(base ^ splitmix64(salt + 0x632be59bd9b4e019ull));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0,1), 53-bit resolution.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0,n). Modulo bias is irrelevant at our scales.
  std::uint32_t bounded(std::uint32_t n) {
    return n ? std::uint32_t(next_u64() % n) : 0u;
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[bounded(std::uint32_t(i))]);
  }

 private:
  std::mt19937_64 gen_;
};

/// FNV-1a over canonical byte serializations (action sequences, configs).
class Fnv1a {
 public:
  void add_byte(std::uint8_t b) {
    h_ ^= b;
    h_ *= 0x100000001b3ull;
  }
  void add_u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) add_byte(std::uint8_t(v >> (8 * i)));
  }
  void add_i32(std::int32_t v) { add_u64(std::uint64_t(std::uint32_t(v))); }
  void add_bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    for (std::size_t i = 0; i < n; ++i) add_byte(b[i]);
  }
  void add_string(const std::string& s) { add_bytes(s.data(), s.size()); }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ull;
};

}  // namespace dvt
