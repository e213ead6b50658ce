#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ecm/movement.hpp"
#include "ecm/rng.hpp"
#include "ecm/types.hpp"

namespace ecm::sim {

using move::MovementModel;
using move::SurveyDesign;

// Randomized survey layout: n_times times drawn uniformly on the
// window and sorted; at each time a uniform number of axis-aligned
// squares of fixed side, placed uniformly in the domain and rejected
// until pairwise disjoint.
struct DesignSpec {
  int n_times;
  gauss::Interval time_window;
  int min_cells_per_time;
  int max_cells_per_time;
  double cell_side;
  gauss::Rect2D placement_domain;

  void validate() const;
};

// Throws std::runtime_error if a time needs more than 1e5 placement
// rejections (domain too crowded for the requested cell count).
SurveyDesign generate_design(const DesignSpec& spec, RngStream& rng);

// positions[i][k]: individual i at times[k].
struct TrajectorySet {
  std::vector<double> times;
  std::vector<std::vector<std::array<double, 2>>> positions;
  // Mixture models record the per-individual branch (1 = Brownian
  // explorer); empty for pure models.  Diagnostics only.
  std::vector<std::uint8_t> explorer;
};

// Exact Gaussian sampling at the given increasing times: stationary
// start plus exact autoregressive transitions for OU variants,
// independent increments for Brownian, per-individual branch choice
// for the mixture.  No time discretization error.
TrajectorySet sample_trajectories(const MovementModel& model,
                                  const std::vector<double>& times, int count,
                                  RngStream& rng);

// counts[k][l] = #{i : positions[i][k] in cells[k][l]}, half-open
// membership per axis.  Requires traj.times == design.times.
CountArrangement count_arrangement(const TrajectorySet& traj,
                                   const SurveyDesign& design);

struct SimulationScenario {
  MovementModel model;
  SurveyDesign design;
  PopulationSize size;
  std::uint64_t seed;
};

struct ScenarioResult {
  CountArrangement counts;
  std::int64_t realized_n;             // Poisson draw, or the known N
  std::vector<std::uint8_t> explorer;  // mixture branch flags
};

// Known N: N trajectories.  Poisson(lambda): draws N first, then N
// trajectories.  All randomness comes from streams derived from
// scenario.seed, so the result is reproducible bit-for-bit.
ScenarioResult simulate_scenario(const SimulationScenario& scenario);

}  // namespace ecm::sim
