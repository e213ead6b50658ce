#include "ecm/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ecm/logspace.hpp"

namespace ecm {

namespace {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

void RngStream::reseed(std::uint64_t seed) {
  std::uint64_t x = seed;
  for (auto& si : s_) si = splitmix64(x);
  has_spare_ = false;
}

RngStream RngStream::derive(std::uint64_t seed,
                            std::initializer_list<std::uint64_t> path) {
  std::uint64_t x = seed;
  std::uint64_t h = splitmix64(x);
  for (std::uint64_t key : path) {
    x = h ^ (key * 0xD1342543DE82EF95ull + 0x2545F4914F6CDD1Dull);
    h = splitmix64(x);
  }
  return RngStream(h);
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

std::int64_t RngStream::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(next_u64());  // full range
  // rejection to kill modulo bias
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return lo + static_cast<std::int64_t>(r % span);
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform01();  // (0, 1]
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

std::int64_t RngStream::poisson(double mean) {
  if (!(mean >= 0) || !std::isfinite(mean))
    throw std::invalid_argument("poisson: bad mean");
  if (mean == 0.0) return 0;
  if (mean < 10.0) {
    // product-of-uniforms search
    const double limit = std::exp(-mean);
    std::int64_t k = 0;
    double prod = uniform01();
    while (prod > limit) {
      ++k;
      prod *= uniform01();
    }
    return k;
  }
  // Hormann's transformed rejection (PTRS) for large means
  const double smu = std::sqrt(mean);
  const double b = 0.931 + 2.53 * smu;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  const double log_mean = std::log(mean);
  for (;;) {
    double u = uniform01() - 0.5;
    double v = uniform01();
    double us = 0.5 - std::fabs(u);
    double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    std::int64_t k = static_cast<std::int64_t>(kf);
    double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
    double rhs = kf * log_mean - mean - log_factorial(k);
    if (lhs <= rhs) return k;
  }
}

std::int64_t RngStream::binomial(std::int64_t n, double p) {
  if (n < 0) throw std::invalid_argument("binomial: n < 0");
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("binomial: p outside [0,1]");
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;
  const bool flipped = p > 0.5;
  const double ps = flipped ? 1.0 - p : p;
  const double nd = static_cast<double>(n);
  std::int64_t k;
  if (nd * ps < 10.0) {
    // sequential cdf inversion from 0
    const double q = 1.0 - ps;
    const double ratio = ps / q;
    double f = std::exp(nd * std::log1p(-ps));  // (1-p)^n
    double u = uniform01();
    k = 0;
    while (u > f && k < n) {
      u -= f;
      ++k;
      f *= ratio * (nd - static_cast<double>(k) + 1.0) / static_cast<double>(k);
    }
  } else {
    // Hormann's BTRS transformed rejection
    const double q = 1.0 - ps;
    const double spq = std::sqrt(nd * ps * q);
    const double b = 1.15 + 2.53 * spq;
    const double a = -0.0873 + 0.0248 * b + 0.01 * ps;
    const double c = nd * ps + 0.5;
    const double vr = 0.92 - 4.2 / b;
    const double alpha = (2.83 + 5.1 / b) * spq;
    const double lpq = std::log(ps / q);
    const std::int64_t m = static_cast<std::int64_t>((nd + 1.0) * ps);
    const double h = log_factorial(m) + log_factorial(n - m);
    for (;;) {
      double u = uniform01() - 0.5;
      double v = uniform01();
      double us = 0.5 - std::fabs(u);
      double kf = std::floor((2.0 * a / us + b) * u + c);
      if (kf < 0.0 || kf > nd) continue;
      std::int64_t kk = static_cast<std::int64_t>(kf);
      if (us >= 0.07 && v <= vr) {
        k = kk;
        break;
      }
      double lhs = std::log(v * alpha / (a / (us * us) + b));
      double rhs = h - log_factorial(kk) - log_factorial(n - kk) +
                   (kf - static_cast<double>(m)) * lpq;
      if (lhs <= rhs) {
        k = kk;
        break;
      }
    }
  }
  return flipped ? n - k : k;
}

void RngStream::multinomial(std::int64_t n, std::span<const double> probs,
                            std::span<std::int64_t> out) {
  if (out.size() != probs.size())
    throw std::invalid_argument("multinomial: output size mismatch");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw std::invalid_argument("multinomial: negative prob");
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-12)
    throw std::invalid_argument("multinomial: probs must sum to 1");
  const std::size_t m = probs.size();
  std::int64_t remaining = n;
  double mass = 1.0;
  for (std::size_t l = 0; l + 1 < m; ++l) {
    if (remaining == 0) {
      out[l] = 0;
      continue;
    }
    double cond = mass > 0.0 ? probs[l] / mass : 0.0;
    if (cond > 1.0) cond = 1.0;
    const std::int64_t x = binomial(remaining, cond);
    out[l] = x;
    remaining -= x;
    mass -= probs[l];
  }
  if (m > 0) out[m - 1] = remaining;
}

}  // namespace ecm
