#include "ecm/charfn.hpp"

#include <cmath>
#include <stdexcept>

namespace ecm {

std::complex<double> ecm_char_function(
    std::span<const double> full_path_probs, const CategorySchedule& schedule,
    const PopulationSize& size, const std::vector<std::vector<double>>& xi) {
  schedule.validate();
  const int n = schedule.n_times();
  if (n > 3) throw std::invalid_argument("char function: n > 3 (oracle scale)");
  std::size_t paths = 1;
  for (int k = 0; k < n; ++k) {
    if (schedule.m[k] > 4)
      throw std::invalid_argument("char function: m_k > 4 (oracle scale)");
    paths *= static_cast<std::size_t>(schedule.m[k]);
  }
  if (full_path_probs.size() != paths)
    throw std::invalid_argument("char function: path array length mismatch");
  if (static_cast<int>(xi.size()) != n)
    throw std::invalid_argument("char function: xi shape mismatch");
  for (int k = 0; k < n; ++k)
    if (static_cast<int>(xi[k].size()) != schedule.m[k])
      throw std::invalid_argument("char function: xi row length mismatch");

  double total = 0.0;
  for (double p : full_path_probs) {
    if (!(p >= 0.0))
      throw std::invalid_argument("char function: negative path probability");
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-10)
    throw std::invalid_argument("char function: path probs must sum to 1");

  std::complex<double> inner = 0.0;
  std::vector<int> idx(n, 0);
  for (std::size_t flat = 0; flat < paths; ++flat) {
    double phase = 0.0;
    for (int k = 0; k < n; ++k) phase += xi[k][idx[k]];
    inner += full_path_probs[flat] *
             std::complex<double>(std::cos(phase), std::sin(phase));
    // row-major increment: last index fastest
    for (int k = n - 1; k >= 0; --k) {
      if (++idx[k] < schedule.m[k]) break;
      idx[k] = 0;
    }
  }

  if (size.is_known())
    return std::pow(inner, static_cast<double>(size.count()));
  return std::exp(size.rate() * (inner - 1.0));
}

}  // namespace ecm
