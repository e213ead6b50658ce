#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "ecm/logspace.hpp"

using ecm::kNegInf;

TEST_SUITE("logspace") {

TEST_CASE("log_sum_exp basics") {
  std::vector<double> v{std::log(0.25), std::log(0.5), std::log(0.25)};
  CHECK(ecm::log_sum_exp(v) == doctest::Approx(0.0).epsilon(1e-14));

  std::vector<double> empty;
  CHECK(ecm::log_sum_exp(empty) == kNegInf);

  std::vector<double> with_ninf{kNegInf, std::log(2.0), kNegInf};
  CHECK(ecm::log_sum_exp(with_ninf) == doctest::Approx(std::log(2.0)));

  std::vector<double> all_ninf{kNegInf, kNegInf};
  CHECK(ecm::log_sum_exp(all_ninf) == kNegInf);
}

TEST_CASE("log_sum_exp resists overflow") {
  // exp(1000) overflows; the shifted form must not.
  std::vector<double> v{1000.0, 1000.0};
  CHECK(ecm::log_sum_exp(v) == doctest::Approx(1000.0 + std::log(2.0)));

  std::vector<double> u{-1000.0, -1000.0 - 50.0};
  CHECK(ecm::log_sum_exp(u) ==
        doctest::Approx(-1000.0 + std::log1p(std::exp(-50.0))));
}

TEST_CASE("online accumulator matches batch") {
  std::vector<double> v{-3.0, 0.5, -700.0, 2.5, kNegInf, -1.0};
  ecm::OnlineLogSumExp acc;
  for (double x : v) acc.add(x);
  CHECK(acc.value() == doctest::Approx(ecm::log_sum_exp(v)).epsilon(1e-15));

  ecm::OnlineLogSumExp fresh;
  CHECK(fresh.value() == kNegInf);
}

TEST_CASE("log_factorial exact small values") {
  CHECK(ecm::log_factorial(0) == 0.0);
  CHECK(ecm::log_factorial(1) == 0.0);
  CHECK(ecm::log_factorial(5) == doctest::Approx(std::log(120.0)).epsilon(1e-15));
  // 20! = 2432902008176640000, exactly representable checkpoints
  CHECK(ecm::log_factorial(20) ==
        doctest::Approx(std::log(2432902008176640000.0)).epsilon(1e-15));
  // table/lgamma crossover must be seamless
  for (int n = 1; n < 300; ++n) {
    const double step = ecm::log_factorial(n) - ecm::log_factorial(n - 1);
    CHECK(step == doctest::Approx(std::log(static_cast<double>(n))).epsilon(1e-13));
  }
}

TEST_CASE("log_binomial_coef") {
  CHECK(ecm::log_binomial_coef(10, 3) ==
        doctest::Approx(std::log(120.0)).epsilon(1e-14));
  CHECK(ecm::log_binomial_coef(10, 0) == doctest::Approx(0.0));
  CHECK(ecm::log_binomial_coef(10, 10) == doctest::Approx(0.0));
}

TEST_CASE("xlogy convention") {
  CHECK(ecm::xlogy(0.0, 0.0) == 0.0);
  CHECK(ecm::xlogy(2.0, 3.0) == doctest::Approx(2.0 * std::log(3.0)));
}

TEST_CASE("poisson_logpmf against independent value") {
  // pmf(3; 2.5) computed by exact high-precision arithmetic
  CHECK(std::exp(ecm::poisson_logpmf(3, 2.5)) ==
        doctest::Approx(0.21376301724973644575).epsilon(1e-14));
  CHECK(ecm::poisson_logpmf(0, 0.0) == 0.0);
  CHECK(ecm::poisson_logpmf(1, 0.0) == kNegInf);
}

}  // TEST_SUITE

TEST_SUITE("props.logspace") {

TEST_CASE("poisson pmf sums to one") {
  for (double rate : {0.3, 2.5, 17.0}) {
    ecm::OnlineLogSumExp acc;
    for (int q = 0; q < 200; ++q) acc.add(ecm::poisson_logpmf(q, rate));
    CHECK(std::exp(acc.value()) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

}  // TEST_SUITE
