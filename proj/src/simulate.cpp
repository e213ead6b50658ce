#include "ecm/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ecm::sim {

namespace {

constexpr int kMaxPlacementRejections = 100000;

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

bool squares_overlap(const gauss::Rect2D& a, const gauss::Rect2D& b) {
  return a.x.lo < b.x.hi && b.x.lo < a.x.hi && a.y.lo < b.y.hi &&
         b.y.lo < a.y.hi;
}

}  // namespace

void DesignSpec::validate() const {
  require(n_times >= 1, "design spec: n_times >= 1");
  require(std::isfinite(time_window.lo) && std::isfinite(time_window.hi) &&
              time_window.lo < time_window.hi,
          "design spec: invalid time window");
  require(min_cells_per_time >= 1 && max_cells_per_time >= min_cells_per_time,
          "design spec: invalid cell count range");
  require(std::isfinite(cell_side) && cell_side > 0.0,
          "design spec: cell side must be positive");
  require(std::isfinite(placement_domain.x.lo) &&
              std::isfinite(placement_domain.x.hi) &&
              std::isfinite(placement_domain.y.lo) &&
              std::isfinite(placement_domain.y.hi),
          "design spec: placement domain must be finite");
  require(placement_domain.x.hi - placement_domain.x.lo >= cell_side &&
              placement_domain.y.hi - placement_domain.y.lo >= cell_side,
          "design spec: domain smaller than one cell");
}

SurveyDesign generate_design(const DesignSpec& spec, RngStream& rng) {
  spec.validate();
  SurveyDesign design;
  design.times.resize(spec.n_times);
  for (double& t : design.times)
    t = rng.uniform(spec.time_window.lo, spec.time_window.hi);
  std::sort(design.times.begin(), design.times.end());
  for (int k = 1; k < spec.n_times; ++k)
    if (design.times[k - 1] == design.times[k])
      throw std::runtime_error("generate_design: duplicate times drawn");

  design.cells.resize(spec.n_times);
  const double x_max = spec.placement_domain.x.hi - spec.cell_side;
  const double y_max = spec.placement_domain.y.hi - spec.cell_side;
  for (int k = 0; k < spec.n_times; ++k) {
    const int want = static_cast<int>(rng.uniform_int(
        spec.min_cells_per_time, spec.max_cells_per_time));
    auto& row = design.cells[k];
    row.reserve(want);
    int rejections = 0;
    while (static_cast<int>(row.size()) < want) {
      const double x = rng.uniform(spec.placement_domain.x.lo, x_max);
      const double y = rng.uniform(spec.placement_domain.y.lo, y_max);
      gauss::Rect2D cand{{x, x + spec.cell_side}, {y, y + spec.cell_side}};
      bool clear = true;
      for (const auto& placed : row)
        if (squares_overlap(cand, placed)) {
          clear = false;
          break;
        }
      if (clear) {
        row.push_back(cand);
      } else if (++rejections > kMaxPlacementRejections) {
        throw std::runtime_error(
            "generate_design: placement rejection limit hit; domain too "
            "crowded for the requested cell count");
      }
    }
  }
  design.validate();
  return design;
}

namespace {

// Exact AR(1) step for the OU law: X(t') | X(t)=x is Gaussian with
// mean z + (x - z) e^{-theta dt} and variance tau^2 (1 - e^{-2 theta dt}).
struct OUStepper {
  double tau;
  double theta;
  std::array<double, 2> z;

  std::array<double, 2> step(const std::array<double, 2>& x, double dt,
                             RngStream& rng) const {
    const double decay = std::exp(-theta * dt);
    const double sd = tau * std::sqrt(std::max(-std::expm1(-2.0 * theta * dt), 0.0));
    std::array<double, 2> out;
    for (int j = 0; j < 2; ++j)
      out[j] = z[j] + (x[j] - z[j]) * decay + sd * rng.normal();
    return out;
  }
};

std::vector<std::array<double, 2>> ou_steady_path(
    const move::OUParams& p, const std::vector<double>& times,
    RngStream& rng) {
  OUStepper st{p.tau, p.theta(), p.z};
  std::vector<std::array<double, 2>> path(times.size());
  path[0] = {p.z[0] + p.tau * rng.normal(), p.z[1] + p.tau * rng.normal()};
  for (std::size_t k = 1; k < times.size(); ++k)
    path[k] = st.step(path[k - 1], times[k] - times[k - 1], rng);
  return path;
}

std::vector<std::array<double, 2>> ou_conditioned_path(
    const move::ConditionedOUParams& p, const std::vector<double>& times,
    RngStream& rng) {
  OUStepper st{p.base.tau, p.base.theta(), p.base.z};
  std::vector<std::array<double, 2>> path(times.size());
  std::array<double, 2> cur = p.x0;
  double t_prev = p.t0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double dt = times[k] - t_prev;
    cur = dt == 0.0 ? cur : st.step(cur, dt, rng);
    path[k] = cur;
    t_prev = times[k];
  }
  return path;
}

std::vector<std::array<double, 2>> brownian_path(
    const move::BrownianParams& p, const std::vector<double>& times,
    RngStream& rng) {
  std::vector<std::array<double, 2>> path(times.size());
  std::array<double, 2> cur = p.x0;
  double t_prev = p.t0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double sd = p.sigma * std::sqrt(times[k] - t_prev);
    for (int j = 0; j < 2; ++j) cur[j] += sd * rng.normal();
    path[k] = cur;
    t_prev = times[k];
  }
  return path;
}

}  // namespace

TrajectorySet sample_trajectories(const MovementModel& model,
                                  const std::vector<double>& times, int count,
                                  RngStream& rng) {
  move::validate_model(model);
  require(count >= 0, "trajectory count must be >= 0");
  require(!times.empty(), "need at least one time");
  for (std::size_t k = 0; k < times.size(); ++k) {
    require(std::isfinite(times[k]), "times must be finite");
    if (k > 0) require(times[k - 1] < times[k], "times must be increasing");
  }
  if (const auto* p = std::get_if<move::ConditionedOUParams>(&model))
    require(times.front() >= p->t0, "times must not precede t0");
  if (const auto* p = std::get_if<move::BrownianParams>(&model))
    require(times.front() >= p->t0, "times must not precede t0");
  if (const auto* p = std::get_if<move::MixtureParams>(&model))
    require(times.front() >= p->brownian.t0, "times must not precede t0");

  TrajectorySet out;
  out.times = times;
  out.positions.resize(count);
  const bool is_mixture = std::holds_alternative<move::MixtureParams>(model);
  if (is_mixture) out.explorer.resize(count, 0);

  for (int i = 0; i < count; ++i) {
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, move::OUParams>) {
            out.positions[i] = ou_steady_path(p, times, rng);
          } else if constexpr (std::is_same_v<T, move::ConditionedOUParams>) {
            out.positions[i] = ou_conditioned_path(p, times, rng);
          } else if constexpr (std::is_same_v<T, move::BrownianParams>) {
            out.positions[i] = brownian_path(p, times, rng);
          } else {
            const bool is_explorer = rng.bernoulli(p.alpha);
            out.explorer[i] = is_explorer ? 1 : 0;
            out.positions[i] = is_explorer
                                   ? brownian_path(p.brownian, times, rng)
                                   : ou_conditioned_path(p.ou, times, rng);
          }
        },
        model);
  }
  return out;
}

CountArrangement count_arrangement(const TrajectorySet& traj,
                                   const SurveyDesign& design) {
  require(traj.times == design.times,
          "trajectories were not sampled at the design times");
  CountArrangement arr;
  arr.schedule = design.schedule();
  arr.counts.resize(design.times.size());
  for (std::size_t k = 0; k < design.times.size(); ++k)
    arr.counts[k].assign(design.cells[k].size(), 0);

  for (const auto& path : traj.positions) {
    require(path.size() == traj.times.size(),
            "trajectory length does not match times");
    for (std::size_t k = 0; k < design.times.size(); ++k) {
      const auto& pt = path[k];
      const auto& cells = design.cells[k];
      for (std::size_t l = 0; l < cells.size(); ++l) {
        if (cells[l].x.lo <= pt[0] && pt[0] < cells[l].x.hi &&
            cells[l].y.lo <= pt[1] && pt[1] < cells[l].y.hi) {
          ++arr.counts[k][l];
          break;  // cells are disjoint
        }
      }
    }
  }
  arr.validate();
  return arr;
}

ScenarioResult simulate_scenario(const SimulationScenario& scenario) {
  move::validate_model(scenario.model);
  scenario.design.validate();

  std::int64_t n;
  if (scenario.size.is_known()) {
    n = scenario.size.count();
  } else {
    RngStream size_rng = RngStream::derive(scenario.seed, {0x5151});
    n = size_rng.poisson(scenario.size.rate());
  }

  RngStream traj_rng = RngStream::derive(scenario.seed, {0x7247});
  TrajectorySet traj = sample_trajectories(scenario.model, scenario.design.times,
                                           static_cast<int>(n), traj_rng);
  ScenarioResult res;
  res.counts = count_arrangement(traj, scenario.design);
  res.realized_n = n;
  res.explorer = std::move(traj.explorer);
  return res;
}

}  // namespace ecm::sim
