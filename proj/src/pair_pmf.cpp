#include "ecm/pair_pmf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ecm/logspace.hpp"
#include "ecm/types.hpp"

namespace ecm {

namespace {

// Validates a probability within the consistency tolerance and clamps
// noise, so quadrature-backed inputs slightly outside [0,1] pass.
double checked_prob(double p, const char* what) {
  if (!(p >= -kProbTol && p <= 1.0 + kProbTol))
    throw std::invalid_argument(std::string("pair pmf: ") + what +
                                " outside [0,1]");
  return std::clamp(p, 0.0, 1.0);
}

// log(base^power) with 0^0 = 1; base may be a clamped zero.
inline double pow_log(std::int64_t power, double log_base, double base) {
  if (power == 0) return 0.0;
  if (base == 0.0) return kNegInf;
  return static_cast<double>(power) * log_base;
}

}  // namespace

double bivariate_binomial_logpmf(std::int64_t q, std::int64_t q2,
                                 std::int64_t N, double p_joint, double p1,
                                 double p2) {
  if (N < 0) throw std::invalid_argument("bivariate binomial: N < 0");
  p1 = checked_prob(p1, "p1");
  p2 = checked_prob(p2, "p2");
  p_joint = checked_prob(p_joint, "p_joint");
  if (p_joint > std::min(p1, p2) + kProbTol)
    throw std::invalid_argument("bivariate binomial: p_joint exceeds a margin");
  p_joint = std::min({p_joint, p1, p2});
  if (p1 + p2 - p_joint > 1.0 + kProbTol)
    throw std::invalid_argument("bivariate binomial: cell mass exceeds 1");

  if (q < 0 || q2 < 0 || q > N || q2 > N) return kNegInf;

  // cell probabilities of one individual: both / A only / B only / neither
  const double c11 = p_joint;
  const double c10 = std::max(0.0, p1 - p_joint);
  const double c01 = std::max(0.0, p2 - p_joint);
  const double c00 = std::max(0.0, 1.0 - p1 - p2 + p_joint);
  const double l11 = c11 > 0 ? std::log(c11) : kNegInf;
  const double l10 = c10 > 0 ? std::log(c10) : kNegInf;
  const double l01 = c01 > 0 ? std::log(c01) : kNegInf;
  const double l00 = c00 > 0 ? std::log(c00) : kNegInf;
  const double lfN = log_factorial(N);

  const std::int64_t j_lo = std::max<std::int64_t>(0, q + q2 - N);
  const std::int64_t j_hi = std::min(q, q2);
  OnlineLogSumExp acc;
  for (std::int64_t j = j_lo; j <= j_hi; ++j) {
    double t = lfN - log_factorial(N - q - q2 + j) - log_factorial(q - j) -
               log_factorial(q2 - j) - log_factorial(j);
    t += pow_log(j, l11, c11);
    t += pow_log(q - j, l10, c10);
    t += pow_log(q2 - j, l01, c01);
    t += pow_log(N - q - q2 + j, l00, c00);
    acc.add(t);
  }
  return acc.value();
}

double bivariate_binomial_pmf(std::int64_t q, std::int64_t q2, std::int64_t N,
                              double p_joint, double p1, double p2) {
  return std::exp(bivariate_binomial_logpmf(q, q2, N, p_joint, p1, p2));
}

double bivariate_poisson_logpmf(std::int64_t q, std::int64_t q2,
                                double rate_joint, double rate1,
                                double rate2) {
  if (!(rate1 >= 0) || !(rate2 >= 0) || !(rate_joint >= 0) ||
      !std::isfinite(rate1) || !std::isfinite(rate2) ||
      !std::isfinite(rate_joint))
    throw std::invalid_argument("bivariate poisson: negative or bad rate");
  const double min_rate = std::min(rate1, rate2);
  // rates are scale-bearing, so the consistency tolerance scales with them
  if (rate_joint > min_rate + kProbTol * (1.0 + min_rate))
    throw std::invalid_argument(
        "bivariate poisson: rate_joint exceeds a margin");
  rate_joint = std::min({rate_joint, rate1, rate2});

  if (q < 0 || q2 < 0) return kNegInf;

  const double ru = rate1 - rate_joint;  // A-only component
  const double rv = rate2 - rate_joint;  // B-only component
  const double lu = ru > 0 ? std::log(ru) : kNegInf;
  const double lv = rv > 0 ? std::log(rv) : kNegInf;
  const double lw = rate_joint > 0 ? std::log(rate_joint) : kNegInf;
  const double base = -(rate1 + rate2 - rate_joint);

  OnlineLogSumExp acc;
  const std::int64_t j_hi = std::min(q, q2);
  for (std::int64_t j = 0; j <= j_hi; ++j) {
    double t = base - log_factorial(q - j) - log_factorial(q2 - j) -
               log_factorial(j);
    t += pow_log(q - j, lu, ru);
    t += pow_log(q2 - j, lv, rv);
    t += pow_log(j, lw, rate_joint);
    acc.add(t);
  }
  return acc.value();
}

double bivariate_poisson_pmf(std::int64_t q, std::int64_t q2,
                             double rate_joint, double rate1, double rate2) {
  return std::exp(bivariate_poisson_logpmf(q, q2, rate_joint, rate1, rate2));
}

double multinomial_pair_logpmf(std::int64_t q, std::int64_t q2, std::int64_t N,
                               double p1, double p2) {
  if (N < 0) throw std::invalid_argument("multinomial pair: N < 0");
  p1 = checked_prob(p1, "p1");
  p2 = checked_prob(p2, "p2");
  if (p1 + p2 > 1.0 + kProbTol)
    throw std::invalid_argument("multinomial pair: p1 + p2 exceeds 1");
  if (q < 0 || q2 < 0 || q + q2 > N) return kNegInf;

  const double p3 = std::max(0.0, 1.0 - p1 - p2);
  const std::int64_t q3 = N - q - q2;
  double t = log_factorial(N) - log_factorial(q) - log_factorial(q2) -
             log_factorial(q3);
  t += pow_log(q, p1 > 0 ? std::log(p1) : kNegInf, p1);
  t += pow_log(q2, p2 > 0 ? std::log(p2) : kNegInf, p2);
  t += pow_log(q3, p3 > 0 ? std::log(p3) : kNegInf, p3);
  return t;
}

double multinomial_pair_pmf(std::int64_t q, std::int64_t q2, std::int64_t N,
                            double p1, double p2) {
  return std::exp(multinomial_pair_logpmf(q, q2, N, p1, p2));
}

}  // namespace ecm
