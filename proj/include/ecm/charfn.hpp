#pragma once

#include <complex>
#include <span>
#include <vector>

#include "ecm/types.hpp"

namespace ecm {

// Characteristic function of the full count arrangement, evaluated from
// the dense joint law of one individual's category path.
// full_path_probs is row-major over (l_1, ..., l_n) with dimensions
// schedule.m and must sum to 1 within 1e-10.  With inner sum
//   S(xi) = sum over paths p(path) * exp(i * sum_k xi[k][l_k]),
// the fixed-N law gives S^N and the Poisson-N law exp(lambda (S - 1)).
// Test-oracle scale only: n <= 3 and m_k <= 4.
std::complex<double> ecm_char_function(
    std::span<const double> full_path_probs, const CategorySchedule& schedule,
    const PopulationSize& size, const std::vector<std::vector<double>>& xi);

}  // namespace ecm
