#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace deffx {

// Seeded generator with platform-independent derived distributions. The
// standard library engines are portable but its distributions are not, so the
// mappings below are done by hand.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();

  template <typename U>
  void shuffle(std::vector<U>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

  // Independent generator for a named sub-stream.
  Rng fork(std::uint64_t stream) { return Rng(next() ^ (0x9E3779B97F4A7C15ull * (stream + 1))); }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace deffx
