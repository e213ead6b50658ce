#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ecm/inference.hpp"
#include "ecm/optimize.hpp"

namespace ecm::vote {

// One district's two-round tallies.  The electorate is closed: both
// rounds sum to the same number of registered voters.  Option lists
// are positional; the last second-round slot is abstention by
// convention (blank and null ballots folded in upstream).
struct DistrictData {
  std::string id;
  std::vector<std::int64_t> first_round;   // m1 options
  std::array<std::int64_t, 3> second_round;

  std::int64_t voters() const;
  void validate() const;
};

struct LoadReport {
  std::vector<DistrictData> districts;
  struct Rejection {
    int line;  // 1-based line number in the file
    std::string id;
    std::string reason;
  };
  std::vector<Rejection> rejected;
  int m1 = 0;
};

// CSV with header district,opt_1..opt_{m1},res_1,res_2,res_3.
// Rows breaking the closed-electorate invariant are reported in
// `rejected` and skipped; structural problems (bad header, wrong
// column count, non-integer or negative values, duplicate ids, no
// usable rows) throw std::runtime_error with the line number.
LoadReport load_districts(const std::string& path);

// Row-stochastic transfer matrix: rows are first-round options, the 3
// columns are the second-round options.
struct TransitionMatrix {
  Eigen::MatrixXd p;  // m1 x 3

  void validate(double tol = 1e-12) const;
};

// Conditional mean and covariance of the second-round count vector
// given the first round: a sum over source options of independent
// multinomial contributions,
//   mean_c   = sum_l q_l T(l,c)
//   cov_cc'  = sum_l q_l (delta_cc' T(l,c) - T(l,c) T(l,c'))
struct ConditionalMoments {
  Eigen::Vector3d mean;
  Eigen::Matrix3d cov;
};

ConditionalMoments district_conditional_moments(const DistrictData& d,
                                                const TransitionMatrix& T);

// Sum over districts of the Gaussian log-density of the two candidate
// counts (abstention dropped: the counts sum to the electorate, which
// makes the full 3x3 covariance singular by construction).  Zero
// covariance means a deterministic transfer: a matching observation
// contributes 0, a mismatch -inf.  Districts whose 2x2 covariance
// stays non-positive-definite through the jitter ladder are skipped
// and counted in *n_skipped.
double transfer_loglik(const std::vector<DistrictData>& districts,
                       const TransitionMatrix& T, int* n_skipped = nullptr);

struct TransferFitResult {
  TransitionMatrix matrix;   // rows renormalized to sum exactly to 1
  Eigen::VectorXd logits;    // 2 per row, abstention as reference
  double loglik = 0.0;
  Eigen::MatrixXd hessian;   // of the negative objective, logit scale
  double min_hessian_eigenvalue = 0.0;
  bool erratic = false;
  int winner_start = -1;
  int iterations = 0;
  int evaluations = 0;
  std::vector<opt::MinimizeResult> starts;
  int skipped_districts = 0;
};

// Multi-start fit of the logit-parametrized matrix: start 0 is the
// uniform matrix, further starts draw logits uniformly from [-2, 2]
// using a stream derived from seed.  Box: every logit in [-12, 12].
TransferFitResult fit_transfer(const std::vector<DistrictData>& districts,
                               int n_starts, std::uint64_t seed,
                               const opt::MinimizeOptions& opts = {});

// Parametric bootstrap: per replicate every district's second round is
// redrawn from its first round through the fitted matrix, the matrix
// is refitted, erratic refits are dropped (4.5% overdraw), and 95%
// percentile intervals are reported for each of the 3*m1 entries
// (row-major).  Deterministic for any job count.
infer::BootstrapResult transfer_bootstrap(
    const TransferFitResult& fitted,
    const std::vector<DistrictData>& districts, int n, std::uint64_t seed,
    int n_starts, int jobs = 1, const opt::MinimizeOptions& opts = {});

}  // namespace ecm::vote
