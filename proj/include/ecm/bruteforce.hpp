#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Dense>

namespace ecm {

// Exact log-probability that the sum of independent multinomial draws
// Multinomial(sizes[l], probs row l) equals target.  Dynamic-programming
// convolution over source categories in log space.  Oracle scale only:
// total count <= 1000 and at most 4 destination categories.
double poisson_multinomial_logpmf_bruteforce(
    std::span<const std::int64_t> sizes, const Eigen::MatrixXd& probs,
    std::span<const std::int64_t> target);

}  // namespace ecm
