#pragma once

#include <array>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "ecm/gauss.hpp"
#include "ecm/types.hpp"

namespace ecm::move {

using gauss::Interval;
using gauss::Rect2D;

// Planar trajectory models with independent, identically-scaled
// coordinates, so every rectangle probability factors into per-axis 1D
// or 2D Gaussian kernels.

// Stationary Ornstein-Uhlenbeck around an activity center z:
// per axis, mean z_j, Cov(X(t), X(s)) = tau^2 exp(-theta |t-s|) with
// mean reversion theta = sigma^2 / (2 tau^2).  tau is the home-range
// scale, sigma the speed scale (local quadratic variation sigma^2).
struct OUParams {
  double tau;
  double sigma;
  std::array<double, 2> z;

  double theta() const { return sigma * sigma / (2.0 * tau * tau); }
  void validate() const;
};

// Stationary OU conditioned on X(t0) = x0: the position is pinned at
// the release time.  Conditioning the stationary Gaussian law gives,
// per axis, for t, s >= t0 and d(t) = t - t0:
//   mean(t)     = z + (x0 - z) e^{-theta d(t)}
//   var(t)      = tau^2 (1 - e^{-2 theta d(t)})
//   cov(t, s)   = tau^2 (e^{-theta |t-s|} - e^{-theta (d(t)+d(s))})
// (project the stationary covariance onto the span of X(t0):
//  C(t,s) - C(t,t0) C(s,t0) / C(t0,t0)).  At t = t0 the law is the
// point mass at x0; as t -> inf it relaxes to the stationary law.
struct ConditionedOUParams {
  OUParams base;
  double t0;
  std::array<double, 2> x0;

  void validate() const;
};

// Planar Brownian motion started at x0 at time t0: per axis mean x0,
// var(t) = sigma^2 (t - t0), cov(t,s) = sigma^2 (min(t,s) - t0).
struct BrownianParams {
  double sigma;
  double t0;
  std::array<double, 2> x0;

  void validate() const;
};

// Two-component population mixture: a fraction alpha of explorers
// follow Brownian motion, the rest a conditioned OU; both components
// share sigma, t0 and x0.
struct MixtureParams {
  double alpha;
  BrownianParams brownian;
  ConditionedOUParams ou;

  void validate() const;
};

using MovementModel =
    std::variant<OUParams, ConditionedOUParams, BrownianParams, MixtureParams>;

void validate_model(const MovementModel& model);

// One-time per-axis law; sd is shared by both axes (isotropy), means
// are not.  sd == 0 marks a degenerate point mass.
struct MarginalLaw {
  std::array<double, 2> mean;
  double sd;
};

MarginalLaw ou_marginal(const OUParams& p, double t);
MarginalLaw ou_marginal(const ConditionedOUParams& p, double t);
MarginalLaw brownian_marginal(const BrownianParams& p, double t);

// Per-axis correlation between positions at two times (equal for both
// axes).  Degenerate times (sd 0) make the correlation meaningless;
// callers must handle sd == 0 first.
double ou_pair_correlation(const OUParams& p, double t, double s);
double ou_pair_correlation(const ConditionedOUParams& p, double t, double s);
double brownian_pair_correlation(const BrownianParams& p, double t, double s);

// P(X(t) in cell).  Gaussian models factor into per-axis interval
// probabilities; the mixture is the alpha-weighted combination of its
// components' probabilities.  Degenerate laws use half-open membership
// [lo, hi) so that edge-sharing cells stay exclusive.
double cell_probability(const MovementModel& model, double t,
                        const Rect2D& cell);

// P(X(t) in cellA, X(s) in cellB), t != s.  Per-axis bivariate normal
// rectangles for Gaussian models; the mixture combines the components'
// PAIR probabilities (alpha P_B(pair) + (1-alpha) P_OU(pair)), which is
// not the product of mixture one-time probabilities.
double pair_cell_probability(const MovementModel& model, double t,
                             const Rect2D& cellA, double s,
                             const Rect2D& cellB);

// Survey: strictly increasing times, per-time disjoint cells.
struct SurveyDesign {
  std::vector<double> times;
  std::vector<std::vector<Rect2D>> cells;

  void validate() const;
  CategorySchedule schedule() const;
};

// Fills one-time entries for every (time, cell) and two-times matrices
// for the requested time pairs (all k < k' when `pairs` is empty).
PathProbabilityTable build_path_table(
    const MovementModel& model, const SurveyDesign& design,
    const std::optional<std::vector<std::pair<int, int>>>& pairs =
        std::nullopt);

}  // namespace ecm::move
