#pragma once

#include <cstdint>
#include <vector>

namespace cosmos {

// Fixed key schedule for deriving per-consumer RNG streams from one root
// seed. Every random draw in a run comes from a stream derived this way,
// so adding or removing worker parallelism cannot reorder draws.
inline constexpr std::uint64_t kDataKey = 1;
inline constexpr std::uint64_t kClientKeyBase = 2;     // client i -> 2 + i
inline constexpr std::uint64_t kServerKeyBase = 1000;  // cluster k -> 1000 + k
inline constexpr std::uint64_t kRegularizerKey = 2000;

// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t key,
                                 std::uint64_t subkey = 0) {
  return mix64(mix64(root ^ mix64(key)) ^ mix64(subkey ^ 0xA0761D6478BD642Full));
}

// Deterministic splitmix64 stream with the handful of samplers the
// simulator needs. Self-contained so results do not depend on the
// standard library's distribution implementations.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}
  RngStream(std::uint64_t root, std::uint64_t key, std::uint64_t subkey = 0)
      : state_(derive_seed(root, key, subkey)) {}

  std::uint64_t next_u64();
  std::uint64_t below(std::uint64_t n);  // uniform in [0, n)
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);
  double normal();                       // standard normal
  double gamma(double alpha);            // shape alpha, unit scale
  std::vector<double> dirichlet(double alpha, std::size_t k);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cosmos
