#pragma once

#include <vector>

#include <Eigen/Dense>

#include "ecm/types.hpp"

namespace ecm {

struct MeanCov {
  std::vector<std::vector<double>> mean;  // ragged, follows the schedule
  Eigen::MatrixXd cov;                    // over flattened (k,l) cells
};

// Mean and covariance of the count vector over all (time, category)
// cells.  Fixed N gives multinomial-style moments:
//   E[Q_l^(k)] = N p_l^(k)
//   Cov same time    = N (delta_{l,l'} p_l - p_l p_l')
//   Cov across times = N (p_{l,l'}^(k,k') - p_l^(k) p_l'^(k'))
// Poisson N makes per-time counts independent Poisson:
//   E = lambda p;  Cov same time = diag(lambda p);
//   Cov across times = lambda p_{l,l'}^(k,k')
// Requires a two_times entry for every k < k'; the returned matrix is
// exactly symmetric.
MeanCov ecm_mean_cov(const PathProbabilityTable& table,
                     const PopulationSize& size);

}  // namespace ecm
