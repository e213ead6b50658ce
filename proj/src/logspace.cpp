#include "ecm/logspace.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ecm {

double log_sum_exp(std::span<const double> v) {
  OnlineLogSumExp acc;
  for (double x : v) acc.add(x);
  return acc.value();
}

void OnlineLogSumExp::add(double log_term) {
  if (log_term == kNegInf) return;
  if (log_term <= max_) {
    sum_ += std::exp(log_term - max_);
    return;
  }
  // new maximum: rescale the accumulated sum
  sum_ = sum_ * std::exp(max_ - log_term) + 1.0;
  max_ = log_term;
}

double OnlineLogSumExp::value() const {
  if (max_ == kNegInf) return kNegInf;
  return max_ + std::log(sum_);
}

namespace {

constexpr int kFactTableSize = 1 << 14;

const double* factorial_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t(kFactTableSize);
    t[0] = 0.0;
    for (int i = 1; i < kFactTableSize; ++i)
      t[i] = t[i - 1] + std::log(static_cast<double>(i));
    return t;
  }();
  return table.data();
}

}  // namespace

double log_factorial(std::int64_t n) {
  if (n < 0) throw std::invalid_argument("log_factorial: negative argument");
  if (n < kFactTableSize) return factorial_table()[n];
  return std::lgamma(static_cast<double>(n) + 1.0);
}

double log_binomial_coef(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n) return kNegInf;
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

double xlogy(double x, double y) {
  if (x == 0.0) return 0.0;
  return x * std::log(y);
}

double poisson_logpmf(std::int64_t q, double rate) {
  if (q < 0) return kNegInf;
  if (!(rate >= 0) || !std::isfinite(rate))
    throw std::invalid_argument("poisson_logpmf: bad rate");
  if (rate == 0.0) return q == 0 ? 0.0 : kNegInf;
  return static_cast<double>(q) * std::log(rate) - rate - log_factorial(q);
}

}  // namespace ecm
