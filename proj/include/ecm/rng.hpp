#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace ecm {

// Deterministic, splittable random stream.  xoshiro256++ core seeded
// through splitmix64; child streams are derived by hashing a key path
// into the seed, so replicate streams are independent of evaluation
// order (reproducible parallel studies).  All distribution samplers are
// implemented here rather than taken from <random> so that a seed pins
// the output bit-for-bit across standard libraries.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) { reseed(seed); }

  // Stream identified by (seed, key path), e.g. (seed, {setting, rep}).
  static RngStream derive(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> path);

  void reseed(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform01();                    // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);  // inclusive
  double normal();  // standard normal, Box-Muller pair cached
  double normal(double mean, double sd) { return mean + sd * normal(); }
  bool bernoulli(double p) { return uniform01() < p; }
  std::int64_t poisson(double mean);
  std::int64_t binomial(std::int64_t n, double p);
  // probs must sum to 1 (tolerance 1e-12); out.size() == probs.size()
  void multinomial(std::int64_t n, std::span<const double> probs,
                   std::span<std::int64_t> out);

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ecm
