#pragma once

#include <cstdint>
#include <limits>
#include <span>

namespace ecm {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(sum(exp(v))) with max-shift; empty input -> -inf.
double log_sum_exp(std::span<const double> v);

// Streaming log-sum-exp: keeps a running maximum and a rescaled sum so
// long accumulations never allocate.
class OnlineLogSumExp {
 public:
  void add(double log_term);
  double value() const;

 private:
  double max_ = kNegInf;
  double sum_ = 0.0;
};

// log(n!).  Table-backed for small n, lgamma beyond; accurate to ~1e-15
// relative either way.
double log_factorial(std::int64_t n);

double log_binomial_coef(std::int64_t n, std::int64_t k);

// x*log(y) with the 0*log(0) = 0 convention.
double xlogy(double x, double y);

// log P(Q = q) for Q ~ Poisson(rate); rate 0 allowed (point mass at 0).
double poisson_logpmf(std::int64_t q, double rate);

}  // namespace ecm
