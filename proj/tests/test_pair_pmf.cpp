#include <cmath>
#include <vector>

#include "doctest.h"
#include "ecm/logspace.hpp"
#include "ecm/pair_pmf.hpp"
#include "ecm/rng.hpp"

namespace {

bool close_abs(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace

TEST_SUITE("pairpmf") {

TEST_CASE("bivariate binomial frozen values") {
  // Exact rational enumeration over the latent both-cells count:
  // N=2, p_joint=1/5, p1=1/2, p2=2/5 gives P(1,1) = 6/25.
  CHECK(close_abs(ecm::bivariate_binomial_pmf(1, 1, 2, 0.2, 0.5, 0.4), 0.24,
                  1e-15));
  // N=5, p_joint=3/20, p1=3/10, p2=3/5
  CHECK(close_abs(ecm::bivariate_binomial_pmf(2, 3, 5, 0.15, 0.3, 0.6),
                  0.10783125, 1e-15));
  CHECK(close_abs(ecm::bivariate_binomial_pmf(0, 5, 5, 0.15, 0.3, 0.6),
                  0.0184528125, 1e-15));
}

TEST_CASE("bivariate binomial support edges") {
  CHECK(ecm::bivariate_binomial_logpmf(6, 0, 5, 0.15, 0.3, 0.6) == ecm::kNegInf);
  CHECK(ecm::bivariate_binomial_logpmf(-1, 0, 5, 0.15, 0.3, 0.6) ==
        ecm::kNegInf);
  // q + q2 can exceed N when the joint cell is occupied
  CHECK(ecm::bivariate_binomial_pmf(5, 5, 5, 0.15, 0.3, 0.6) > 0.0);
  // q + q2 - N > min(q,q2) is impossible: j would have to exceed q
  CHECK(ecm::bivariate_binomial_logpmf(5, 1, 5, 0.0, 0.3, 0.6) == ecm::kNegInf);
  CHECK_THROWS(ecm::bivariate_binomial_logpmf(1, 1, 5, 0.4, 0.3, 0.6));
  CHECK_THROWS(ecm::bivariate_binomial_logpmf(1, 1, 5, -0.1, 0.3, 0.6));
}

TEST_CASE("bivariate poisson frozen value") {
  // rates are marginal: X ~ Poisson(1.3), Y ~ Poisson(2.1), Cov = 0.7
  CHECK(close_abs(ecm::bivariate_poisson_pmf(2, 3, 0.7, 1.3, 2.1),
                  0.05624563772215137343, 1e-16));
}

TEST_CASE("bivariate poisson edge cases") {
  CHECK(ecm::bivariate_poisson_logpmf(-1, 0, 0.5, 1.0, 1.0) == ecm::kNegInf);
  // zero joint rate factorizes
  const double lhs = ecm::bivariate_poisson_logpmf(2, 4, 0.0, 1.2, 0.8);
  const double rhs = ecm::poisson_logpmf(2, 1.2) + ecm::poisson_logpmf(4, 0.8);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
  // joint rate equal to a marginal: X = W exactly, so q > q2 impossible
  CHECK(ecm::bivariate_poisson_pmf(3, 1, 1.0, 1.0, 2.0) == 0.0);
  CHECK(ecm::bivariate_poisson_pmf(1, 3, 1.0, 1.0, 2.0) > 0.0);
  CHECK_THROWS(ecm::bivariate_poisson_logpmf(1, 1, 1.5, 1.0, 2.0));
}

TEST_CASE("trinomial frozen value") {
  // 7!/(2!3!2!) 0.2^2 0.35^3 0.45^2
  CHECK(close_abs(ecm::multinomial_pair_pmf(2, 3, 7, 0.2, 0.35), 0.072930375,
                  1e-15));
  CHECK(ecm::multinomial_pair_logpmf(5, 3, 7, 0.2, 0.35) == ecm::kNegInf);
}

}  // TEST_SUITE

TEST_SUITE("props.pairpmf") {

TEST_CASE("bivariate binomial marginals and normalization") {
  ecm::RngStream rng(911);
  for (int trial = 0; trial < 20; ++trial) {
    const std::int64_t N = rng.uniform_int(1, 7);
    const double p1 = rng.uniform(0.05, 0.6);
    const double p2 = rng.uniform(0.05, 0.6);
    const double pj = rng.uniform(0.0, 1.0) * std::min(p1, p2);
    if (1.0 - p1 - p2 + pj < 0.0) continue;
    double total = 0.0;
    for (std::int64_t q = 0; q <= N; ++q) {
      double row = 0.0;
      for (std::int64_t q2 = 0; q2 <= N; ++q2)
        row += ecm::bivariate_binomial_pmf(q, q2, N, pj, p1, p2);
      // marginal of q is Binomial(N, p1)
      const double binom = std::exp(ecm::log_binomial_coef(N, q) +
                                    ecm::xlogy(static_cast<double>(q), p1) +
                                    ecm::xlogy(static_cast<double>(N - q),
                                               1.0 - p1));
      CHECK(close_abs(row, binom, 1e-12));
      total += row;
    }
    CHECK(close_abs(total, 1.0, 1e-12));
  }
}

TEST_CASE("bivariate binomial symmetry") {
  // swapping (q,p1) with (q2,p2) leaves the pmf unchanged
  ecm::RngStream rng(912);
  for (int trial = 0; trial < 50; ++trial) {
    const std::int64_t N = rng.uniform_int(1, 8);
    const double p1 = rng.uniform(0.05, 0.5);
    const double p2 = rng.uniform(0.05, 0.5);
    const double pj = rng.uniform(0.0, 1.0) * std::min(p1, p2);
    const std::int64_t q = rng.uniform_int(0, N);
    const std::int64_t q2 = rng.uniform_int(0, N);
    CHECK(ecm::bivariate_binomial_logpmf(q, q2, N, pj, p1, p2) ==
          doctest::Approx(ecm::bivariate_binomial_logpmf(q2, q, N, pj, p2, p1))
              .epsilon(1e-13));
  }
}

TEST_CASE("bivariate binomial independence case") {
  // p_joint = p1 p2 makes the two indicators independent per individual,
  // but counts still share the one-per-individual constraint; compare
  // against direct latent enumeration instead of a naive product.
  const double p1 = 0.3, p2 = 0.45;
  double total = 0.0;
  for (int q = 0; q <= 4; ++q)
    for (int q2 = 0; q2 <= 4; ++q2)
      total += ecm::bivariate_binomial_pmf(q, q2, 4, p1 * p2, p1, p2);
  CHECK(close_abs(total, 1.0, 1e-13));
}

TEST_CASE("bivariate poisson marginals and normalization") {
  ecm::RngStream rng(913);
  for (int trial = 0; trial < 10; ++trial) {
    const double r1 = rng.uniform(0.2, 5.0);
    const double r2 = rng.uniform(0.2, 5.0);
    const double rj = rng.uniform(0.0, 1.0) * std::min(r1, r2);
    const int cap = 60;
    double total = 0.0;
    for (int q = 0; q < cap; ++q) {
      double row = 0.0;
      for (int q2 = 0; q2 < cap; ++q2)
        row += ecm::bivariate_poisson_pmf(q, q2, rj, r1, r2);
      CHECK(close_abs(row, std::exp(ecm::poisson_logpmf(q, r1)), 1e-11));
      total += row;
    }
    CHECK(close_abs(total, 1.0, 1e-10));
  }
}

TEST_CASE("trinomial marginals") {
  const std::int64_t N = 9;
  const double p1 = 0.25, p2 = 0.4;
  double total = 0.0;
  for (std::int64_t q = 0; q <= N; ++q) {
    double row = 0.0;
    for (std::int64_t q2 = 0; q2 + q <= N; ++q2)
      row += ecm::multinomial_pair_pmf(q, q2, N, p1, p2);
    const double binom = std::exp(ecm::log_binomial_coef(N, q) +
                                  ecm::xlogy(static_cast<double>(q), p1) +
                                  ecm::xlogy(static_cast<double>(N - q),
                                             1.0 - p1));
    CHECK(close_abs(row, binom, 1e-12));
    total += row;
  }
  CHECK(close_abs(total, 1.0, 1e-12));
}

}  // TEST_SUITE
