#include "ecm/types.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ecm {

int CategorySchedule::total_cells() const {
  int tot = 0;
  for (int mk : m) tot += mk;
  return tot;
}

int CategorySchedule::cell_offset(int k) const {
  int off = 0;
  for (int i = 0; i < k; ++i) off += m[i];
  return off;
}

void CategorySchedule::validate() const {
  if (m.empty()) throw std::invalid_argument("schedule: no time steps");
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (m[k] < 1)
      throw std::invalid_argument("schedule: m[" + std::to_string(k) +
                                  "] must be >= 1");
  }
}

void CountArrangement::validate() const {
  schedule.validate();
  if (counts.size() != schedule.m.size())
    throw std::invalid_argument("arrangement: row count != schedule length");
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (static_cast<int>(counts[k].size()) != schedule.m[k])
      throw std::invalid_argument("arrangement: row " + std::to_string(k) +
                                  " length mismatch");
    for (std::int64_t c : counts[k])
      if (c < 0)
        throw std::invalid_argument("arrangement: negative count at time " +
                                    std::to_string(k));
  }
}

std::int64_t CountArrangement::total_at(int k) const {
  std::int64_t tot = 0;
  for (std::int64_t c : counts.at(k)) tot += c;
  return tot;
}

bool PathProbabilityTable::has_pair(int k, int k2) const {
  return two_times.count({k, k2}) > 0;
}

const Eigen::MatrixXd& PathProbabilityTable::pair(int k, int k2) const {
  auto it = two_times.find({k, k2});
  if (it == two_times.end())
    throw std::invalid_argument("table: missing two_times entry (" +
                                std::to_string(k) + "," + std::to_string(k2) +
                                ")");
  return it->second;
}

namespace {

double clamp_prob(double p, const char* what, double tol) {
  if (!(p >= kNegClamp))  // catches NaN too
    throw std::invalid_argument(std::string("table: ") + what +
                                " negative beyond clamp floor");
  if (p < 0) p = 0.0;
  if (p > 1.0 + tol)
    throw std::invalid_argument(std::string("table: ") + what + " exceeds 1");
  return p > 1.0 ? 1.0 : p;
}

}  // namespace

void PathProbabilityTable::validate(double tol) {
  schedule.validate();
  if (one_time.size() != schedule.m.size())
    throw std::invalid_argument("table: one_time rows != schedule length");
  for (std::size_t k = 0; k < one_time.size(); ++k) {
    if (static_cast<int>(one_time[k].size()) != schedule.m[k])
      throw std::invalid_argument("table: one_time row " + std::to_string(k) +
                                  " length mismatch");
    double row_sum = 0.0;
    for (double& p : one_time[k]) {
      p = clamp_prob(p, "one_time entry", tol);
      row_sum += p;
    }
    if (row_sum > 1.0 + tol)
      throw std::invalid_argument("table: one_time row " + std::to_string(k) +
                                  " sums beyond 1");
  }
  for (auto& [kk, mat] : two_times) {
    auto [k, k2] = kk;
    if (k < 0 || k2 <= k || k2 >= schedule.n_times())
      throw std::invalid_argument("table: bad two_times key");
    if (mat.rows() != schedule.m[k] || mat.cols() != schedule.m[k2])
      throw std::invalid_argument("table: two_times shape mismatch at (" +
                                  std::to_string(k) + "," +
                                  std::to_string(k2) + ")");
    for (int l = 0; l < mat.rows(); ++l) {
      double row_sum = 0.0;
      for (int l2 = 0; l2 < mat.cols(); ++l2) {
        double p = clamp_prob(mat(l, l2), "two_times entry", tol);
        double cap = std::min(one_time[k][l], one_time[k2][l2]);
        if (p > cap + tol)
          throw std::invalid_argument(
              "table: pair probability exceeds a margin at (" +
              std::to_string(k) + "," + std::to_string(k2) + ")");
        if (p > cap) p = cap;
        mat(l, l2) = p;
        row_sum += p;
      }
      // joint mass of cell l at time k across all k2-cells cannot exceed
      // the cell's own mass
      if (row_sum > one_time[k][l] + tol)
        throw std::invalid_argument("table: two_times row mass exceeds margin");
    }
    for (int l2 = 0; l2 < mat.cols(); ++l2) {
      double col_sum = mat.col(l2).sum();
      if (col_sum > one_time[k2][l2] + tol)
        throw std::invalid_argument("table: two_times col mass exceeds margin");
    }
  }
}

PopulationSize PopulationSize::known(std::int64_t n) {
  if (n < 1) throw std::invalid_argument("population: N must be >= 1");
  return PopulationSize(true, n, 0.0);
}

PopulationSize PopulationSize::poisson_rate(double lambda) {
  if (!(lambda > 0) || !std::isfinite(lambda))
    throw std::invalid_argument("population: lambda must be positive finite");
  return PopulationSize(false, 0, lambda);
}

std::int64_t PopulationSize::count() const {
  if (!known_) throw std::logic_error("population: not a fixed-N size");
  return n_;
}

double PopulationSize::rate() const {
  if (known_) throw std::logic_error("population: not a Poisson size");
  return lambda_;
}

}  // namespace ecm
