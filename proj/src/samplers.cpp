#include "ecm/samplers.hpp"

#include <cmath>
#include <stdexcept>

namespace ecm {

namespace {

void check_row_sums_to_one(const Eigen::MatrixXd& cond, int row) {
  double s = cond.row(row).sum();
  if (std::fabs(s - 1.0) > 1e-12)
    throw std::invalid_argument("conditional sampler: row " +
                                std::to_string(row) + " does not sum to 1");
  for (int j = 0; j < cond.cols(); ++j)
    if (!(cond(row, j) >= 0.0))
      throw std::invalid_argument("conditional sampler: negative entry");
}

}  // namespace

std::vector<std::int64_t> sample_conditional_next(
    std::span<const std::int64_t> counts_k, const Eigen::MatrixXd& cond,
    RngStream& rng) {
  if (static_cast<std::int64_t>(counts_k.size()) != cond.rows())
    throw std::invalid_argument("conditional sampler: shape mismatch");
  const int m2 = static_cast<int>(cond.cols());
  std::vector<std::int64_t> out(m2, 0);
  std::vector<double> row(m2);
  std::vector<std::int64_t> draw(m2);
  for (std::size_t l = 0; l < counts_k.size(); ++l) {
    if (counts_k[l] < 0)
      throw std::invalid_argument("conditional sampler: negative count");
    if (counts_k[l] == 0) continue;  // undefined rows allowed when unused
    check_row_sums_to_one(cond, static_cast<int>(l));
    for (int j = 0; j < m2; ++j) row[j] = cond(static_cast<int>(l), j);
    rng.multinomial(counts_k[l], row, draw);
    for (int j = 0; j < m2; ++j) out[j] += draw[j];
  }
  return out;
}

std::vector<std::int64_t> sample_conditional_next_poisson(
    std::span<const std::int64_t> observed_counts, const Eigen::MatrixXd& cond,
    std::span<const double> complement_rates, RngStream& rng) {
  std::vector<std::int64_t> out =
      sample_conditional_next(observed_counts, cond, rng);
  if (complement_rates.size() != out.size())
    throw std::invalid_argument("conditional sampler: rate length mismatch");
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (!(complement_rates[j] >= 0.0))
      throw std::invalid_argument("conditional sampler: negative rate");
    out[j] += rng.poisson(complement_rates[j]);
  }
  return out;
}

}  // namespace ecm
