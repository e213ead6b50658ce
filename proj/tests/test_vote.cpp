#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "ecm/logspace.hpp"
#include "ecm/rng.hpp"
#include "ecm/samplers.hpp"
#include "ecm/vote_transfer.hpp"

using namespace ecm::vote;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  std::string path = "vote_test_" + name + ".csv";
  std::ofstream out(path);
  out << content;
  return path;
}

TransitionMatrix planted2() {
  TransitionMatrix T;
  T.p.resize(2, 3);
  T.p << 0.6, 0.3, 0.1, 0.2, 0.5, 0.3;
  return T;
}

// Synthetic electorate with an exact multinomial second round.
std::vector<DistrictData> synth_districts(const TransitionMatrix& T,
                                          int n_districts,
                                          std::uint64_t seed) {
  ecm::RngStream rng(seed);
  std::vector<DistrictData> out;
  for (int d = 0; d < n_districts; ++d) {
    DistrictData dd;
    dd.id = "d" + std::to_string(d);
    const int m1 = static_cast<int>(T.p.rows());
    for (int l = 0; l < m1; ++l)
      dd.first_round.push_back(rng.uniform_int(150, 900));
    auto second = ecm::sample_conditional_next(dd.first_round, T.p, rng);
    dd.second_round = {second[0], second[1], second[2]};
    out.push_back(dd);
  }
  return out;
}

}  // namespace

TEST_SUITE("vote") {

TEST_CASE("district validation") {
  DistrictData d;
  d.id = "x";
  d.first_round = {10, 20};
  d.second_round = {15, 10, 5};
  CHECK_NOTHROW(d.validate());
  CHECK(d.voters() == 30);
  d.second_round = {15, 10, 4};
  CHECK_THROWS(d.validate());
  d.second_round = {15, 10, 5};
  d.first_round[0] = -1;
  CHECK_THROWS(d.validate());
}

TEST_CASE("transition matrix validation") {
  TransitionMatrix T = planted2();
  CHECK_NOTHROW(T.validate());
  T.p(0, 0) = 0.7;  // row 0 sums to 1.1
  CHECK_THROWS(T.validate());
  T = planted2();
  T.p(1, 2) = -0.1;
  CHECK_THROWS(T.validate());
}

TEST_CASE("conditional moments match the multinomial mixture") {
  // exact values computed by hand for first = (30, 20)
  DistrictData d;
  d.id = "m";
  d.first_round = {30, 20};
  d.second_round = {21, 20, 9};
  TransitionMatrix T = planted2();
  ConditionalMoments mom = district_conditional_moments(d, T);
  CHECK(mom.mean[0] == doctest::Approx(22.0).epsilon(1e-14));
  CHECK(mom.mean[1] == doctest::Approx(19.0).epsilon(1e-14));
  CHECK(mom.mean[2] == doctest::Approx(9.0).epsilon(1e-14));
  CHECK(mom.cov(0, 0) == doctest::Approx(10.4).epsilon(1e-13));
  CHECK(mom.cov(0, 1) == doctest::Approx(-7.4).epsilon(1e-13));
  CHECK(mom.cov(0, 2) == doctest::Approx(-3.0).epsilon(1e-13));
  // rows of the covariance sum to zero: totals are deterministic
  for (int a = 0; a < 3; ++a)
    CHECK(mom.cov.row(a).sum() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("single-district loglik frozen value") {
  DistrictData d;
  d.id = "m";
  d.first_round = {30, 20};
  d.second_round = {21, 20, 9};
  std::vector<DistrictData> ds{d};
  int skipped = -1;
  const double got = transfer_loglik(ds, planted2(), &skipped);
  CHECK(skipped == 0);
  CHECK(std::abs(got - -3.962507349653424885) < 1e-11);
}

TEST_CASE("deterministic transfer shortcut") {
  // identity-like transfer: every first-round option maps to itself
  TransitionMatrix T;
  T.p.resize(3, 3);
  T.p << 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0;
  DistrictData match;
  match.id = "ok";
  match.first_round = {5, 7, 3};
  match.second_round = {5, 7, 3};
  std::vector<DistrictData> ds{match};
  CHECK(transfer_loglik(ds, T) == 0.0);
  DistrictData off = match;
  off.second_round = {6, 6, 3};
  ds = {off};
  CHECK(transfer_loglik(ds, T) == ecm::kNegInf);
}

TEST_CASE("csv loading accepts the strict layout") {
  const std::string path = write_temp(
      "good",
      "district,opt_1,opt_2,res_1,res_2,res_3\n"
      "a,100,50,80,40,30\n"
      "b,10,20,5,20,5\n");
  LoadReport rep = load_districts(path);
  CHECK(rep.m1 == 2);
  REQUIRE(rep.districts.size() == 2);
  CHECK(rep.rejected.empty());
  CHECK(rep.districts[0].id == "a");
  CHECK(rep.districts[0].voters() == 150);
  std::remove(path.c_str());
}

TEST_CASE("csv closure violations are rejected row-wise") {
  const std::string path = write_temp(
      "closure",
      "district,opt_1,opt_2,res_1,res_2,res_3\n"
      "a,100,50,80,40,30\n"
      "bad,10,20,5,20,6\n"
      "c,30,30,20,20,20\n");
  LoadReport rep = load_districts(path);
  CHECK(rep.districts.size() == 2);
  REQUIRE(rep.rejected.size() == 1);
  CHECK(rep.rejected[0].line == 3);
  CHECK(rep.rejected[0].id == "bad");
  std::remove(path.c_str());
}

TEST_CASE("csv structural problems throw") {
  const std::string bad_header = write_temp(
      "hdr", "district,opt_1,res_1,res_2\na,10,5,5\n");
  CHECK_THROWS(load_districts(bad_header));
  std::remove(bad_header.c_str());

  const std::string dup = write_temp(
      "dup",
      "district,opt_1,res_1,res_2,res_3\n"
      "a,10,5,3,2\n"
      "a,20,10,5,5\n");
  CHECK_THROWS(load_districts(dup));
  std::remove(dup.c_str());

  const std::string negative = write_temp(
      "neg",
      "district,opt_1,res_1,res_2,res_3\n"
      "a,-10,5,3,2\n");
  CHECK_THROWS(load_districts(negative));
  std::remove(negative.c_str());

  const std::string ragged = write_temp(
      "ragged",
      "district,opt_1,res_1,res_2,res_3\n"
      "a,10,5,3\n");
  CHECK_THROWS(load_districts(ragged));
  std::remove(ragged.c_str());

  const std::string empty = write_temp(
      "empty", "district,opt_1,res_1,res_2,res_3\n");
  CHECK_THROWS(load_districts(empty));
  std::remove(empty.c_str());

  // all rows violating closure: rejected everywhere, nothing usable
  const std::string all_bad = write_temp(
      "allbad",
      "district,opt_1,res_1,res_2,res_3\n"
      "a,10,5,3,3\n");
  CHECK_THROWS(load_districts(all_bad));
  std::remove(all_bad.c_str());
}

TEST_CASE("fit recovers a planted matrix") {
  TransitionMatrix T = planted2();
  auto districts = synth_districts(T, 60, 5150);
  TransferFitResult fr = fit_transfer(districts, 2, 31337);
  CHECK(!fr.erratic);
  CHECK(fr.skipped_districts == 0);
  for (int l = 0; l < 2; ++l) {
    CHECK(std::abs(fr.matrix.p.row(l).sum() - 1.0) < 1e-12);
    for (int c = 0; c < 3; ++c)
      CHECK(std::abs(fr.matrix.p(l, c) - T.p(l, c)) < 0.05);
  }
}

TEST_CASE("fit is deterministic in the seed") {
  auto districts = synth_districts(planted2(), 30, 5151);
  TransferFitResult a = fit_transfer(districts, 3, 7);
  TransferFitResult b = fit_transfer(districts, 3, 7);
  REQUIRE(a.logits.size() == b.logits.size());
  CHECK(a.logits.isApprox(b.logits, 0.0));
  CHECK(a.loglik == b.loglik);
}

TEST_CASE("few districts are refused") {
  auto districts = synth_districts(planted2(), 1, 5152);
  CHECK_THROWS(fit_transfer(districts, 2, 7));
}

}  // TEST_SUITE

TEST_SUITE("props.vote") {

TEST_CASE("fitted rows are distributions whatever the data") {
  ecm::RngStream rng(616);
  for (int trial = 0; trial < 3; ++trial) {
    TransitionMatrix T;
    T.p.resize(3, 3);
    for (int l = 0; l < 3; ++l) {
      double a = rng.uniform(0.05, 1.0), b = rng.uniform(0.05, 1.0),
             c = rng.uniform(0.05, 1.0);
      const double s = a + b + c;
      T.p.row(l) << a / s, b / s, c / s;
    }
    auto districts = synth_districts(T, 40, 700 + trial);
    TransferFitResult fr = fit_transfer(districts, 2, 41 + trial);
    for (int l = 0; l < 3; ++l) {
      CHECK(std::abs(fr.matrix.p.row(l).sum() - 1.0) < 1e-12);
      for (int c = 0; c < 3; ++c) {
        CHECK(fr.matrix.p(l, c) >= 0.0);
        CHECK(fr.matrix.p(l, c) <= 1.0);
      }
    }
  }
}

TEST_CASE("bootstrap keeps job-count invariance") {
  auto districts = synth_districts(planted2(), 40, 5153);
  TransferFitResult fr = fit_transfer(districts, 2, 11);
  REQUIRE(!fr.erratic);
  ecm::infer::BootstrapResult b1 =
      transfer_bootstrap(fr, districts, 8, 21, 2, 1);
  ecm::infer::BootstrapResult b2 =
      transfer_bootstrap(fr, districts, 8, 21, 2, 3);
  CHECK(b1.n_retained == b2.n_retained);
  REQUIRE(b1.n_retained > 0);
  CHECK(b1.samples.isApprox(b2.samples, 0.0));
  // intervals must contain the point estimate
  for (int idx = 0; idx < 6; ++idx) {
    const int l = idx / 3, c = idx % 3;
    CHECK(b1.ci_lower[idx] <= fr.matrix.p(l, c) + 1e-9);
    CHECK(b1.ci_upper[idx] >= fr.matrix.p(l, c) - 1e-9);
  }
}

}  // TEST_SUITE
