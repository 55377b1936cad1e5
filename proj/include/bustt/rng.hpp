#pragma once

#include <cstdint>
#include <string_view>

namespace bustt {

// Counter-based generator (splitmix64). Small state, cheap to fork, and the
// derivation rule below gives every route / tree / replicate its own stable
// stream from one master seed:
//
//   child = derive_seed(parent, tag)            for named stages ("synth", "forest", ...)
//   child = derive_seed(parent, index)          for the i-th item of a stage
//
// Reruns with the same master seed reproduce every stream bit for bit, and
// streams do not depend on thread count or evaluation order.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1), both ends open (safe for log / logit transforms).
  double uniform_pos() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  /// Standard normal (Box-Muller, cosine branch only; stateless across calls).
  double normal();

  /// Gamma(shape, 1) via Marsaglia-Tsang squeeze.
  double gamma(double shape);

private:
  std::uint64_t state_;
};

std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

}  // namespace bustt
