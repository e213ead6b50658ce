#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ecm/rng.hpp"

namespace ecm {

// Draws the next-time counts given current counts: the sum over source
// categories l of independent Multinomial(counts_k[l], cond row l)
// draws.  Rows of cond are conditional category probabilities and must
// sum to 1 within 1e-12; except rows whose source count is 0, which
// are skipped entirely (a zero-probability source has an undefined
// conditional row and contributes nothing).
std::vector<std::int64_t> sample_conditional_next(
    std::span<const std::int64_t> counts_k, const Eigen::MatrixXd& cond,
    RngStream& rng);

// Poisson-population variant: the observed categories transfer as
// above, and the unobserved complement contributes an independent
// Poisson count per destination with the given rates.
std::vector<std::int64_t> sample_conditional_next_poisson(
    std::span<const std::int64_t> observed_counts, const Eigen::MatrixXd& cond,
    std::span<const double> complement_rates, RngStream& rng);

}  // namespace ecm
