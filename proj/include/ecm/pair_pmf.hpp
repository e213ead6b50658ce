#pragma once

#include <cstdint>

namespace ecm {

// Joint pmf of the counts of one population observed in two categories
// at two different times.  Each of the N individuals lands in category
// A at the first time with probability p1, in category B at the second
// time with probability p2, and in both with probability p_joint.
// Sums over the latent number j of individuals counted in both:
//   P(q,q2) = sum_j N!/((N-q-q2+j)! (q-j)! (q2-j)! j!)
//             * p_joint^j (p1-p_joint)^(q-j) (p2-p_joint)^(q2-j)
//             * (1-p1-p2+p_joint)^(N-q-q2+j)
// over j = max(0, q+q2-N) .. min(q,q2), computed in log space.
// Counts outside the support give -inf; invalid probabilities throw.
double bivariate_binomial_logpmf(std::int64_t q, std::int64_t q2,
                                 std::int64_t N, double p_joint, double p1,
                                 double p2);
double bivariate_binomial_pmf(std::int64_t q, std::int64_t q2, std::int64_t N,
                              double p_joint, double p1, double p2);

// Joint pmf of two Poisson counts sharing a latent common component:
// X = W + U, Y = W + V with W,U,V independent Poisson and
// E[X] = rate1, E[Y] = rate2, E[W] = rate_joint = Cov(X,Y).
double bivariate_poisson_logpmf(std::int64_t q, std::int64_t q2,
                                double rate_joint, double rate1, double rate2);
double bivariate_poisson_pmf(std::int64_t q, std::int64_t q2,
                             double rate_joint, double rate1, double rate2);

// Same-time pair of multinomial counts: trinomial over (cell 1, cell 2,
// everything else) with probabilities (p1, p2, 1-p1-p2).
double multinomial_pair_logpmf(std::int64_t q, std::int64_t q2, std::int64_t N,
                               double p1, double p2);
double multinomial_pair_pmf(std::int64_t q, std::int64_t q2, std::int64_t N,
                            double p1, double p2);

}  // namespace ecm
