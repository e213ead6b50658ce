#include <cmath>
#include <vector>

#include "doctest.h"
#include "ecm/movement.hpp"
#include "ecm/rng.hpp"

using namespace ecm::move;

namespace {

bool close_abs(double a, double b, double tol) { return std::abs(a - b) <= tol; }

const OUParams kSteady{0.4, 0.4 * std::sqrt(0.002), {-0.2, 0.1}};

}  // namespace

TEST_SUITE("movement") {

TEST_CASE("parameter validation") {
  CHECK_NOTHROW(kSteady.validate());
  CHECK_THROWS(OUParams{-0.1, 0.2, {0, 0}}.validate());
  CHECK_THROWS(OUParams{0.1, 0.0, {0, 0}}.validate());
  CHECK_THROWS(BrownianParams{0.0, 0.0, {0, 0}}.validate());

  // mixture components must share sigma, t0 and x0 exactly
  MixtureParams mix{0.3,
                    {0.2, 0.0, {0.1, 0.1}},
                    {{0.5, 0.2, {0, 0}}, 0.0, {0.1, 0.1}}};
  CHECK_NOTHROW(mix.validate());
  MixtureParams bad = mix;
  bad.brownian.sigma = 0.21;
  CHECK_THROWS(bad.validate());
  bad = mix;
  bad.ou.x0[0] = 0.2;
  CHECK_THROWS(bad.validate());
  bad = mix;
  bad.alpha = 1.2;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("steady OU marginal and correlation") {
  const MarginalLaw law = ou_marginal(kSteady, 3.7);
  CHECK(law.mean[0] == -0.2);
  CHECK(law.mean[1] == 0.1);
  CHECK(law.sd == 0.4);
  CHECK(kSteady.theta() == doctest::Approx(0.001).epsilon(1e-15));

  // theta |t-s| = 0.01 at |t-s| = 10
  CHECK(close_abs(ou_pair_correlation(kSteady, 2.0, 12.0),
                  0.990049833749168054, 1e-15));
  CHECK(ou_pair_correlation(kSteady, 5.0, 5.0) == 1.0);
}

TEST_CASE("conditioned OU endpoints") {
  const ConditionedOUParams p{{0.5, 0.3, {-0.1, 0.2}}, 1.0, {0.1, -0.2}};
  // at the conditioning time the law is the point mass at x0
  const MarginalLaw at0 = ou_marginal(p, 1.0);
  CHECK(at0.mean[0] == doctest::Approx(0.1));
  CHECK(at0.mean[1] == doctest::Approx(-0.2));
  CHECK(at0.sd == 0.0);
  // far future relaxes to the stationary law
  const MarginalLaw far = ou_marginal(p, 1e6);
  CHECK(far.mean[0] == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(far.sd == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("conditioned OU variance formula") {
  const ConditionedOUParams p{{0.5, 0.3, {-0.1, 0.2}}, 0.0, {0.1, -0.2}};
  const double theta = p.base.theta();
  for (double t : {0.001, 0.5, 3.0, 60.0}) {
    const MarginalLaw law = ou_marginal(p, t);
    const double var = 0.25 * (1.0 - std::exp(-2.0 * theta * t));
    CHECK(law.sd * law.sd == doctest::Approx(var).epsilon(1e-12));
    const double mean0 = -0.1 + (0.1 - -0.1) * std::exp(-theta * t);
    CHECK(law.mean[0] == doctest::Approx(mean0).epsilon(1e-12));
  }
}

TEST_CASE("conditioned OU correlation is stable near t0") {
  // both variances vanish at t0; the ratio must stay in [-1, 1] and
  // approach 1 as the two times coalesce
  const ConditionedOUParams p{{0.4, 0.02, {0, 0}}, 0.0, {0.3, 0.3}};
  const double r = ou_pair_correlation(p, 1e-8, 2e-8);
  CHECK(r > 0.7);
  CHECK(r <= 1.0);
  const double r2 = ou_pair_correlation(p, 5.0, 5.0 + 1e-12);
  CHECK(r2 == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("brownian marginal and correlation") {
  const BrownianParams p{0.2, 1.0, {0.4, -0.3}};
  const MarginalLaw law = brownian_marginal(p, 5.0);
  CHECK(law.mean[0] == 0.4);
  CHECK(law.mean[1] == -0.3);
  CHECK(law.sd == doctest::Approx(0.2 * 2.0).epsilon(1e-15));
  // corr(t,s) = sqrt((min-t0)/(max-t0))
  CHECK(brownian_pair_correlation(p, 2.0, 5.0) ==
        doctest::Approx(std::sqrt(1.0 / 4.0)).epsilon(1e-14));
  CHECK(brownian_pair_correlation(p, 5.0, 2.0) ==
        doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("cell probability, steady OU frozen value") {
  // adaptive quadrature of the product of two axis marginals
  const Rect2D cell{{-0.25, -0.15}, {0.05, 0.15}};
  CHECK(close_abs(cell_probability(kSteady, 2.0, cell),
                  0.00989556403700343489, 1e-12));
}

TEST_CASE("pair probability, steady OU frozen value") {
  const Rect2D a{{-0.25, -0.15}, {0.05, 0.15}};
  const Rect2D b{{-0.3, -0.2}, {0.0, 0.1}};
  // rho = exp(-0.0025): the near-singular quadrature branch
  CHECK(close_abs(pair_cell_probability(kSteady, 2.0, a, 4.5, b),
                  0.00243152794327641205, 1e-10));
}

TEST_CASE("pair probability, conditioned OU frozen value") {
  const ConditionedOUParams p{{0.5, 0.3, {-0.1, 0.2}}, 0.0, {0.1, -0.2}};
  const Rect2D a{{0.0, 0.4}, {-0.3, 0.1}};
  const Rect2D b{{-0.2, 0.2}, {-0.1, 0.3}};
  CHECK(close_abs(cell_probability(p, 1.3, a), 0.215890502585013384, 1e-12));
  CHECK(close_abs(pair_cell_probability(p, 1.3, a, 2.7, b),
                  0.0399667867781513693, 1e-11));
}

TEST_CASE("pair probability, brownian frozen value") {
  const BrownianParams p{0.2, 0.0, {0.0, 0.0}};
  const Rect2D a{{-0.1, 0.1}, {-0.1, 0.1}};
  const Rect2D b{{0.0, 0.3}, {-0.2, 0.1}};
  CHECK(close_abs(pair_cell_probability(p, 1.0, a, 3.0, b),
                  0.0201331926997923405, 1e-11));
}

TEST_CASE("degenerate release-time cell membership") {
  const ConditionedOUParams p{{0.5, 0.3, {0, 0}}, 0.0, {0.1, 0.1}};
  // point mass: half-open membership decides the boundary
  CHECK(cell_probability(p, 0.0, {{0.0, 0.2}, {0.0, 0.2}}) == 1.0);
  CHECK(cell_probability(p, 0.0, {{0.1, 0.2}, {0.1, 0.2}}) == 1.0);
  CHECK(cell_probability(p, 0.0, {{-0.1, 0.1}, {0.0, 0.2}}) == 0.0);
  // pair with the release time factorizes through the indicator
  const Rect2D b{{-0.5, 0.5}, {-0.5, 0.5}};
  const double pb = cell_probability(p, 2.0, b);
  CHECK(close_abs(pair_cell_probability(p, 0.0, {{0.0, 0.2}, {0.0, 0.2}}, 2.0, b),
                  pb, 1e-12));
  CHECK(pair_cell_probability(p, 0.0, {{0.2, 0.4}, {0.0, 0.2}}, 2.0, b) == 0.0);
}

TEST_CASE("mixture combines pair probabilities, not one-time products") {
  const MixtureParams mix{0.35,
                          {0.2, 0.0, {0.05, -0.05}},
                          {{0.5, 0.2, {-0.1, 0.1}}, 0.0, {0.05, -0.05}}};
  const Rect2D a{{-0.2, 0.2}, {-0.3, 0.1}};
  const Rect2D b{{0.0, 0.35}, {-0.15, 0.2}};
  const double pm = pair_cell_probability(mix, 0.8, a, 2.1, b);
  const double pb = pair_cell_probability(mix.brownian, 0.8, a, 2.1, b);
  const double pou = pair_cell_probability(mix.ou, 0.8, a, 2.1, b);
  CHECK(close_abs(pm, 0.35 * pb + 0.65 * pou, 1e-13));
  // one-time version combines too
  const double om = cell_probability(mix, 0.8, a);
  CHECK(close_abs(om,
                  0.35 * cell_probability(mix.brownian, 0.8, a) +
                      0.65 * cell_probability(mix.ou, 0.8, a),
                  1e-13));
  // and the naive product of mixture marginals is wrong
  const double naive = om * cell_probability(mix, 2.1, b);
  CHECK(std::abs(pm - naive) > 1e-4);
}

TEST_CASE("survey design validation") {
  SurveyDesign d;
  d.times = {0.5, 1.5};
  d.cells = {{{{0.0, 0.1}, {0.0, 0.1}}, {{0.2, 0.3}, {0.0, 0.1}}},
             {{{-0.1, 0.0}, {-0.1, 0.0}}}};
  CHECK_NOTHROW(d.validate());
  CHECK(d.schedule().m == std::vector<int>{2, 1});

  SurveyDesign bad = d;
  bad.times = {1.5, 0.5};
  CHECK_THROWS(bad.validate());
  bad = d;
  bad.cells[0][1] = {{0.05, 0.15}, {0.0, 0.1}};  // overlaps cell 0
  CHECK_THROWS(bad.validate());
  bad = d;
  bad.cells[0][1] = {{0.1, 0.2}, {0.0, 0.1}};  // shares an edge: fine
  CHECK_NOTHROW(bad.validate());
  bad = d;
  bad.cells[0][0].x.lo = 0.2;  // empty interval
  CHECK_THROWS(bad.validate());
}

TEST_CASE("path table matches pointwise calls") {
  SurveyDesign d;
  d.times = {0.5, 1.5, 4.0};
  d.cells = {{{{-0.3, -0.2}, {0.0, 0.1}}, {{0.0, 0.1}, {0.0, 0.1}}},
             {{{-0.25, -0.15}, {0.05, 0.15}}},
             {{{-0.2, -0.1}, {-0.1, 0.0}}, {{0.1, 0.2}, {0.1, 0.2}}}};
  const MovementModel model = kSteady;
  ecm::PathProbabilityTable t = build_path_table(model, d);
  REQUIRE(t.one_time.size() == 3);
  for (int k = 0; k < 3; ++k)
    for (std::size_t l = 0; l < d.cells[k].size(); ++l)
      CHECK(close_abs(t.one_time[k][l],
                      cell_probability(model, d.times[k], d.cells[k][l]),
                      1e-14));
  for (int k = 0; k < 3; ++k)
    for (int k2 = k + 1; k2 < 3; ++k2) {
      REQUIRE(t.has_pair(k, k2));
      const Eigen::MatrixXd& m = t.pair(k, k2);
      for (int a = 0; a < m.rows(); ++a)
        for (int b = 0; b < m.cols(); ++b)
          CHECK(close_abs(m(a, b),
                          pair_cell_probability(model, d.times[k],
                                                d.cells[k][a], d.times[k2],
                                                d.cells[k2][b]),
                          1e-13));
    }
}

TEST_CASE("path table pair subset") {
  SurveyDesign d;
  d.times = {0.5, 1.5, 4.0};
  d.cells = {{{{-0.3, -0.2}, {0.0, 0.1}}},
             {{{-0.25, -0.15}, {0.05, 0.15}}},
             {{{-0.2, -0.1}, {-0.1, 0.0}}}};
  std::vector<std::pair<int, int>> wanted{{0, 2}};
  ecm::PathProbabilityTable t = build_path_table(kSteady, d, wanted);
  CHECK(t.has_pair(0, 2));
  CHECK(!t.has_pair(0, 1));
  CHECK(!t.has_pair(1, 2));
}

}  // TEST_SUITE

TEST_SUITE("props.movement") {

TEST_CASE("quadratic variation identity") {
  // Var[X(t+dt) - X(t)] / dt -> sigma^2 as dt -> 0, for every model
  // sharing the sigma interpretation
  const double dt = 1e-6;
  const double t = 2.0;

  const OUParams ou{0.4, 0.05, {0.1, -0.1}};
  {
    const double v1 = ou.tau * ou.tau;
    const double rho = ou_pair_correlation(ou, t, t + dt);
    const double inc_var = 2.0 * v1 * (1.0 - rho);
    CHECK(std::abs(inc_var / dt - ou.sigma * ou.sigma) <
          1e-3 * ou.sigma * ou.sigma);
  }
  {
    const ConditionedOUParams cp{ou, 0.0, {0.2, 0.2}};
    const MarginalLaw a = ou_marginal(cp, t);
    const MarginalLaw b = ou_marginal(cp, t + dt);
    const double rho = ou_pair_correlation(cp, t, t + dt);
    const double inc_var =
        a.sd * a.sd + b.sd * b.sd - 2.0 * rho * a.sd * b.sd;
    CHECK(std::abs(inc_var / dt - ou.sigma * ou.sigma) <
          1e-3 * ou.sigma * ou.sigma);
  }
  {
    const BrownianParams bp{0.05, 0.0, {0, 0}};
    const MarginalLaw a = brownian_marginal(bp, t);
    const MarginalLaw b = brownian_marginal(bp, t + dt);
    const double rho = brownian_pair_correlation(bp, t, t + dt);
    const double inc_var =
        a.sd * a.sd + b.sd * b.sd - 2.0 * rho * a.sd * b.sd;
    CHECK(std::abs(inc_var / dt - bp.sigma * bp.sigma) <
          1e-3 * bp.sigma * bp.sigma);
  }
}

TEST_CASE("probabilities are probabilities") {
  ecm::RngStream rng(31);
  std::vector<MovementModel> models{
      kSteady, ConditionedOUParams{{0.5, 0.3, {-0.1, 0.2}}, 0.0, {0.1, -0.2}},
      BrownianParams{0.2, 0.0, {0, 0}},
      MixtureParams{0.4,
                    {0.3, 0.0, {0, 0}},
                    {{0.6, 0.3, {0.1, 0.1}}, 0.0, {0, 0}}}};
  for (const auto& model : models) {
    for (int i = 0; i < 40; ++i) {
      const double t = rng.uniform(0.05, 8.0);
      const double s = t + rng.uniform(0.05, 5.0);
      const double cx = rng.uniform(-1.0, 1.0), cy = rng.uniform(-1.0, 1.0);
      const double dx = rng.uniform(-1.0, 1.0), dy = rng.uniform(-1.0, 1.0);
      const Rect2D a{{cx, cx + 0.3}, {cy, cy + 0.3}};
      const Rect2D b{{dx, dx + 0.3}, {dy, dy + 0.3}};
      const double pa = cell_probability(model, t, a);
      const double pb = cell_probability(model, s, b);
      const double pab = pair_cell_probability(model, t, a, s, b);
      CHECK(pa >= 0.0);
      CHECK(pa <= 1.0);
      CHECK(pab >= -1e-14);
      // joint cannot exceed either margin
      CHECK(pab <= pa + 1e-11);
      CHECK(pab <= pb + 1e-11);
    }
  }
}

TEST_CASE("pair law sums to the margin over a partition") {
  // tile a big square; summing the pair prob over the tiles at the
  // second time recovers most of the first-time margin
  const ConditionedOUParams p{{0.45, 0.25, {0.0, 0.0}}, 0.0, {0.05, 0.05}};
  const Rect2D a{{-0.2, 0.1}, {-0.15, 0.15}};
  const double t = 1.1, s = 2.9;
  const double pa = cell_probability(p, t, a);
  // 16x16 tiles covering [-3, 3]^2 at time s: essentially all mass
  double acc = 0.0;
  const int K = 16;
  const double side = 6.0 / K;
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) {
      const Rect2D b{{-3.0 + i * side, -3.0 + (i + 1) * side},
                     {-3.0 + j * side, -3.0 + (j + 1) * side}};
      acc += pair_cell_probability(p, t, a, s, b);
    }
  CHECK(std::abs(acc - pa) < 1e-7);
}

TEST_CASE("table validates for every model family") {
  SurveyDesign d;
  d.times = {0.4, 1.1, 2.6, 5.0};
  ecm::RngStream rng(32);
  d.cells.resize(4);
  for (int k = 0; k < 4; ++k)
    for (int c = 0; c < 3; ++c) {
      // disjoint by construction: separated columns
      const double x = -0.9 + 0.61 * c;
      const double y = rng.uniform(-0.8, 0.6);
      d.cells[k].push_back({{x, x + 0.25}, {y, y + 0.25}});
    }
  d.validate();
  std::vector<MovementModel> models{
      kSteady, ConditionedOUParams{{0.5, 0.3, {-0.1, 0.2}}, 0.0, {0.1, -0.2}},
      BrownianParams{0.2, 0.0, {0, 0}},
      MixtureParams{0.4,
                    {0.3, 0.0, {0.05, 0.0}},
                    {{0.6, 0.3, {0.1, 0.1}}, 0.0, {0.05, 0.0}}}};
  for (const auto& model : models) {
    ecm::PathProbabilityTable t = build_path_table(model, d);
    CHECK_NOTHROW(t.validate());
    CHECK(t.two_times.size() == 6);
  }
}

}  // TEST_SUITE
