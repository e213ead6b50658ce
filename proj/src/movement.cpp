#include "ecm/movement.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ecm::move {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

bool finite2(const std::array<double, 2>& v) {
  return std::isfinite(v[0]) && std::isfinite(v[1]);
}

// Half-open membership keeps edge-sharing cells exclusive when the law
// is a point mass.
bool in_half_open(const Interval& iv, double x) {
  return iv.lo <= x && x < iv.hi;
}

bool in_half_open(const Rect2D& cell, const std::array<double, 2>& pt) {
  return in_half_open(cell.x, pt[0]) && in_half_open(cell.y, pt[1]);
}

double interval_prob(const Interval& iv, double mean, double sd) {
  return gauss::normal_interval_prob((iv.lo - mean) / sd,
                                     (iv.hi - mean) / sd);
}

Interval standardized(const Interval& iv, double mean, double sd) {
  return Interval{(iv.lo - mean) / sd, (iv.hi - mean) / sd};
}

double clamp_corr(double rho) { return std::clamp(rho, -1.0, 1.0); }

}  // namespace

void OUParams::validate() const {
  require(std::isfinite(tau) && tau > 0.0, "OU: tau must be positive");
  require(std::isfinite(sigma) && sigma > 0.0, "OU: sigma must be positive");
  require(finite2(z), "OU: center must be finite");
}

void ConditionedOUParams::validate() const {
  base.validate();
  require(std::isfinite(t0), "conditioned OU: t0 must be finite");
  require(finite2(x0), "conditioned OU: x0 must be finite");
}

void BrownianParams::validate() const {
  require(std::isfinite(sigma) && sigma > 0.0,
          "Brownian: sigma must be positive");
  require(std::isfinite(t0), "Brownian: t0 must be finite");
  require(finite2(x0), "Brownian: x0 must be finite");
}

void MixtureParams::validate() const {
  require(std::isfinite(alpha) && alpha >= 0.0 && alpha <= 1.0,
          "mixture: alpha must lie in [0,1]");
  brownian.validate();
  ou.validate();
  // Components describe the same release event and speed scale.
  require(brownian.sigma == ou.base.sigma, "mixture: sigma differs");
  require(brownian.t0 == ou.t0, "mixture: t0 differs");
  require(brownian.x0 == ou.x0, "mixture: x0 differs");
}

void validate_model(const MovementModel& model) {
  std::visit([](const auto& p) { p.validate(); }, model);
}

MarginalLaw ou_marginal(const OUParams& p, double t) {
  require(std::isfinite(t), "time must be finite");
  return MarginalLaw{p.z, p.tau};
}

MarginalLaw ou_marginal(const ConditionedOUParams& p, double t) {
  require(std::isfinite(t) && t >= p.t0, "time must be finite and >= t0");
  const double th = p.base.theta();
  const double decay = std::exp(-th * (t - p.t0));
  // var = tau^2 (1 - e^{-2 theta d}); expm1 keeps small d accurate.
  const double var =
      -p.base.tau * p.base.tau * std::expm1(-2.0 * th * (t - p.t0));
  MarginalLaw law;
  for (int j = 0; j < 2; ++j)
    law.mean[j] = p.base.z[j] + (p.x0[j] - p.base.z[j]) * decay;
  law.sd = std::sqrt(std::max(var, 0.0));
  return law;
}

MarginalLaw brownian_marginal(const BrownianParams& p, double t) {
  require(std::isfinite(t) && t >= p.t0, "time must be finite and >= t0");
  return MarginalLaw{p.x0, p.sigma * std::sqrt(t - p.t0)};
}

double ou_pair_correlation(const OUParams& p, double t, double s) {
  require(std::isfinite(t) && std::isfinite(s), "times must be finite");
  return std::exp(-p.theta() * std::fabs(t - s));
}

double ou_pair_correlation(const ConditionedOUParams& p, double t, double s) {
  require(std::isfinite(t) && std::isfinite(s) && t >= p.t0 && s >= p.t0,
          "times must be finite and >= t0");
  const double th = p.base.theta();
  const double dt = t - p.t0;
  const double ds = s - p.t0;
  require(dt > 0.0 && ds > 0.0,
          "correlation undefined at the degenerate release time");
  // cov  = tau^2 e^{-theta|t-s|} (1 - e^{-2 theta min(dt,ds)})
  // var_t = tau^2 (1 - e^{-2 theta dt}), same for s; tau^2 cancels.
  const double num = std::exp(-th * std::fabs(t - s)) *
                     (-std::expm1(-2.0 * th * std::min(dt, ds)));
  const double den =
      std::sqrt(-std::expm1(-2.0 * th * dt)) *
      std::sqrt(-std::expm1(-2.0 * th * ds));
  return clamp_corr(num / den);
}

double brownian_pair_correlation(const BrownianParams& p, double t, double s) {
  require(std::isfinite(t) && std::isfinite(s) && t >= p.t0 && s >= p.t0,
          "times must be finite and >= t0");
  const double lo = std::min(t, s) - p.t0;
  const double hi = std::max(t, s) - p.t0;
  require(lo > 0.0,
          "correlation undefined at the degenerate release time");
  return clamp_corr(std::sqrt(lo / hi));
}

namespace {

// Single Gaussian component: marginal law + pair correlation.
struct GaussLaw {
  MarginalLaw at_t;
  MarginalLaw at_s;
  double rho;
};

double gauss_cell_prob(const MarginalLaw& law, const Rect2D& cell) {
  if (law.sd == 0.0) return in_half_open(cell, law.mean) ? 1.0 : 0.0;
  return interval_prob(cell.x, law.mean[0], law.sd) *
         interval_prob(cell.y, law.mean[1], law.sd);
}

// Pair probability for one Gaussian component.  A point mass can only
// occur at the release time, where the law of the other time is
// already the conditional law given that position, so the pair factors
// into indicator times one-time probability.
double gauss_pair_prob(const GaussLaw& g, const Rect2D& cellA,
                       const Rect2D& cellB) {
  if (g.at_t.sd == 0.0)
    return in_half_open(cellA, g.at_t.mean) ? gauss_cell_prob(g.at_s, cellB)
                                            : 0.0;
  if (g.at_s.sd == 0.0)
    return in_half_open(cellB, g.at_s.mean) ? gauss_cell_prob(g.at_t, cellA)
                                            : 0.0;
  const double px = gauss::bvn_rect(standardized(cellA.x, g.at_t.mean[0], g.at_t.sd),
                                    standardized(cellB.x, g.at_s.mean[0], g.at_s.sd),
                                    g.rho);
  const double py = gauss::bvn_rect(standardized(cellA.y, g.at_t.mean[1], g.at_t.sd),
                                    standardized(cellB.y, g.at_s.mean[1], g.at_s.sd),
                                    g.rho);
  return px * py;
}

GaussLaw component_law(const OUParams& p, double t, double s) {
  return GaussLaw{ou_marginal(p, t), ou_marginal(p, s),
                  ou_pair_correlation(p, t, s)};
}

GaussLaw component_law(const ConditionedOUParams& p, double t, double s) {
  GaussLaw g{ou_marginal(p, t), ou_marginal(p, s), 0.0};
  if (g.at_t.sd > 0.0 && g.at_s.sd > 0.0)
    g.rho = ou_pair_correlation(p, t, s);
  return g;
}

GaussLaw component_law(const BrownianParams& p, double t, double s) {
  GaussLaw g{brownian_marginal(p, t), brownian_marginal(p, s), 0.0};
  if (g.at_t.sd > 0.0 && g.at_s.sd > 0.0)
    g.rho = brownian_pair_correlation(p, t, s);
  return g;
}

}  // namespace

double cell_probability(const MovementModel& model, double t,
                        const Rect2D& cell) {
  return std::visit(
      [&](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, MixtureParams>) {
          return p.alpha * cell_probability(MovementModel{p.brownian}, t, cell) +
                 (1.0 - p.alpha) *
                     cell_probability(MovementModel{p.ou}, t, cell);
        } else if constexpr (std::is_same_v<T, BrownianParams>) {
          return gauss_cell_prob(brownian_marginal(p, t), cell);
        } else {
          return gauss_cell_prob(ou_marginal(p, t), cell);
        }
      },
      model);
}

double pair_cell_probability(const MovementModel& model, double t,
                             const Rect2D& cellA, double s,
                             const Rect2D& cellB) {
  require(t != s, "pair probability needs two distinct times");
  return std::visit(
      [&](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, MixtureParams>) {
          // Mixing happens at the trajectory level, so the pair law
          // mixes pair probabilities; it does not factor through the
          // mixed one-time laws.
          return p.alpha * pair_cell_probability(MovementModel{p.brownian}, t,
                                                 cellA, s, cellB) +
                 (1.0 - p.alpha) * pair_cell_probability(MovementModel{p.ou},
                                                         t, cellA, s, cellB);
        } else {
          return gauss_pair_prob(component_law(p, t, s), cellA, cellB);
        }
      },
      model);
}

void SurveyDesign::validate() const {
  require(!times.empty(), "design: need at least one time");
  require(cells.size() == times.size(),
          "design: cells and times must align");
  for (std::size_t k = 0; k < times.size(); ++k) {
    require(std::isfinite(times[k]), "design: times must be finite");
    if (k > 0)
      require(times[k - 1] < times[k],
              "design: times must be strictly increasing");
    require(!cells[k].empty(), "design: need at least one cell per time");
    for (const Rect2D& c : cells[k]) {
      require(!std::isnan(c.x.lo) && !std::isnan(c.x.hi) &&
                  !std::isnan(c.y.lo) && !std::isnan(c.y.hi),
              "design: cell bounds must not be NaN");
      require(c.x.lo < c.x.hi && c.y.lo < c.y.hi,
              "design: cells must have positive extent");
    }
    // Half-open overlap test: [lo,hi) rectangles intersect iff both
    // axis intervals do.
    for (std::size_t i = 0; i < cells[k].size(); ++i)
      for (std::size_t j = i + 1; j < cells[k].size(); ++j) {
        const Rect2D& a = cells[k][i];
        const Rect2D& b = cells[k][j];
        const bool overlap = a.x.lo < b.x.hi && b.x.lo < a.x.hi &&
                             a.y.lo < b.y.hi && b.y.lo < a.y.hi;
        require(!overlap, "design: cells at one time must be disjoint");
      }
  }
}

CategorySchedule SurveyDesign::schedule() const {
  CategorySchedule sched;
  sched.m.reserve(cells.size());
  for (const auto& row : cells) sched.m.push_back(static_cast<int>(row.size()));
  return sched;
}

namespace {

// Table build for one Gaussian component.  One context per time pair
// serves both axes and every cell pair because the correlation depends
// only on the two times.
template <class Params>
void fill_component_table(const Params& p, const SurveyDesign& design,
                          const std::vector<std::pair<int, int>>& pairs,
                          PathProbabilityTable& table) {
  const int n = static_cast<int>(design.times.size());
  std::vector<MarginalLaw> laws;
  laws.reserve(n);
  for (int k = 0; k < n; ++k) {
    if constexpr (std::is_same_v<Params, BrownianParams>)
      laws.push_back(brownian_marginal(p, design.times[k]));
    else
      laws.push_back(ou_marginal(p, design.times[k]));
    auto& row = table.one_time[k];
    for (std::size_t l = 0; l < design.cells[k].size(); ++l)
      row[l] = gauss_cell_prob(laws[k], design.cells[k][l]);
  }

  for (const auto& [k, k2] : pairs) {
    const auto& cellsA = design.cells[k];
    const auto& cellsB = design.cells[k2];
    Eigen::MatrixXd& mat = table.two_times[{k, k2}];
    mat.setZero(static_cast<Eigen::Index>(cellsA.size()),
                static_cast<Eigen::Index>(cellsB.size()));

    GaussLaw g = component_law(p, design.times[k], design.times[k2]);
    const bool degenerate_t = g.at_t.sd == 0.0;
    const bool degenerate_s = g.at_s.sd == 0.0;

    if (degenerate_t || degenerate_s) {
      for (std::size_t a = 0; a < cellsA.size(); ++a)
        for (std::size_t b = 0; b < cellsB.size(); ++b)
          mat(a, b) += gauss_pair_prob(g, cellsA[a], cellsB[b]);
      continue;
    }

    if (std::fabs(g.rho) > 1.0 - 1e-12) {
      // Exact comonotone limit; bvn_rect handles it analytically.
      for (std::size_t a = 0; a < cellsA.size(); ++a)
        for (std::size_t b = 0; b < cellsB.size(); ++b) {
          const double px = gauss::bvn_rect(
              standardized(cellsA[a].x, g.at_t.mean[0], g.at_t.sd),
              standardized(cellsB[b].x, g.at_s.mean[0], g.at_s.sd), g.rho);
          const double py = gauss::bvn_rect(
              standardized(cellsA[a].y, g.at_t.mean[1], g.at_t.sd),
              standardized(cellsB[b].y, g.at_s.mean[1], g.at_s.sd), g.rho);
          mat(a, b) += px * py;
        }
      continue;
    }

    gauss::BvnContext ctx(g.rho);
    // Standardize each axis once per side.
    std::vector<Interval> ax(cellsA.size()), ay(cellsA.size());
    for (std::size_t a = 0; a < cellsA.size(); ++a) {
      ax[a] = standardized(cellsA[a].x, g.at_t.mean[0], g.at_t.sd);
      ay[a] = standardized(cellsA[a].y, g.at_t.mean[1], g.at_t.sd);
    }
    std::vector<Interval> bx(cellsB.size()), by(cellsB.size());
    for (std::size_t b = 0; b < cellsB.size(); ++b) {
      bx[b] = standardized(cellsB[b].x, g.at_s.mean[0], g.at_s.sd);
      by[b] = standardized(cellsB[b].y, g.at_s.mean[1], g.at_s.sd);
    }
    for (std::size_t a = 0; a < cellsA.size(); ++a)
      for (std::size_t b = 0; b < cellsB.size(); ++b)
        mat(a, b) += gauss::bvn_rect(ctx, ax[a], bx[b]) *
                     gauss::bvn_rect(ctx, ay[a], by[b]);
  }
}

}  // namespace

PathProbabilityTable build_path_table(
    const MovementModel& model, const SurveyDesign& design,
    const std::optional<std::vector<std::pair<int, int>>>& pairs) {
  validate_model(model);
  design.validate();

  const int n = static_cast<int>(design.times.size());
  std::vector<std::pair<int, int>> wanted;
  if (pairs.has_value()) {
    wanted = *pairs;
    for (const auto& [k, k2] : wanted)
      require(0 <= k && k < k2 && k2 < n, "pair indices must satisfy 0 <= k < k' < n");
  } else {
    for (int k = 0; k < n; ++k)
      for (int k2 = k + 1; k2 < n; ++k2) wanted.emplace_back(k, k2);
  }

  PathProbabilityTable table;
  table.schedule = design.schedule();
  table.one_time.resize(n);
  for (int k = 0; k < n; ++k)
    table.one_time[k].assign(design.cells[k].size(), 0.0);
  for (const auto& kk : wanted)
    table.two_times[kk] = Eigen::MatrixXd();

  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, MixtureParams>) {
          PathProbabilityTable tb = build_path_table(
              MovementModel{p.brownian}, design, std::make_optional(wanted));
          PathProbabilityTable to = build_path_table(
              MovementModel{p.ou}, design, std::make_optional(wanted));
          for (int k = 0; k < n; ++k)
            for (std::size_t l = 0; l < table.one_time[k].size(); ++l)
              table.one_time[k][l] = p.alpha * tb.one_time[k][l] +
                                     (1.0 - p.alpha) * to.one_time[k][l];
          for (const auto& kk : wanted)
            table.two_times[kk] = p.alpha * tb.two_times[kk] +
                                  (1.0 - p.alpha) * to.two_times[kk];
        } else {
          fill_component_table(p, design, wanted, table);
        }
      },
      model);

  table.validate();
  return table;
}

}  // namespace ecm::move
