#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ecm {

// Absolute tolerance for probability consistency checks (row sums,
// pair <= min of margins).  Quadrature-backed probabilities carry noise
// of this order.
inline constexpr double kProbTol = 1e-9;
// Negative values above this floor are treated as quadrature noise and
// clamped to zero.
inline constexpr double kNegClamp = -1e-12;

// Category layout over time: m[k] categories at time step k (0-based).
// Categories may appear, disappear, split or merge between steps; only
// the per-step counts matter here.
struct CategorySchedule {
  std::vector<int> m;

  int n_times() const { return static_cast<int>(m.size()); }
  int total_cells() const;
  // Offset of time k's first category in the flattened (k,l) ordering.
  int cell_offset(int k) const;
  void validate() const;  // throws std::invalid_argument
};

// Observed counts per (time, category).  Ragged rows follow a schedule.
struct CountArrangement {
  CategorySchedule schedule;
  std::vector<std::vector<std::int64_t>> counts;

  void validate() const;
  std::int64_t total_at(int k) const;
};

// One-time and two-times category probabilities.
//
// one_time[k][l] = P(individual in category l at time k).  Rows may sum
// to less than 1: the remainder is an implicit unobserved complement
// category (surveyed cells usually cover only part of the plane).
// two_times[(k,k')](l,l') = P(category l at time k AND l' at time k'),
// stored dense for k < k'.
struct PathProbabilityTable {
  CategorySchedule schedule;
  std::vector<std::vector<double>> one_time;
  std::map<std::pair<int, int>, Eigen::MatrixXd> two_times;

  bool has_pair(int k, int k2) const;
  const Eigen::MatrixXd& pair(int k, int k2) const;  // throws if missing

  // Checks ranges, row sums <= 1, pair entries <= min of margins and
  // pair row/col sums <= margins, all within kProbTol; clamps negative
  // noise above kNegClamp to 0.  Throws on violations beyond tolerance.
  void validate(double tol = kProbTol);
};

// Population size: fixed N, or Poisson with rate lambda.
class PopulationSize {
 public:
  static PopulationSize known(std::int64_t n);
  static PopulationSize poisson_rate(double lambda);

  bool is_known() const { return known_; }
  std::int64_t count() const;  // throws unless known
  double rate() const;         // throws unless Poisson
  double mean() const { return known_ ? static_cast<double>(n_) : lambda_; }

 private:
  PopulationSize(bool known, std::int64_t n, double lambda)
      : known_(known), n_(n), lambda_(lambda) {}
  bool known_;
  std::int64_t n_;
  double lambda_;
};

}  // namespace ecm
