#include "ecm/moments.hpp"

#include <stdexcept>

namespace ecm {

MeanCov ecm_mean_cov(const PathProbabilityTable& table,
                     const PopulationSize& size) {
  const CategorySchedule& sched = table.schedule;
  sched.validate();
  if (table.one_time.size() != sched.m.size())
    throw std::invalid_argument("ecm_mean_cov: table/schedule mismatch");
  const int n = sched.n_times();
  const int dim = sched.total_cells();
  const double scale = size.mean();  // N or lambda

  MeanCov out;
  out.mean.resize(n);
  out.cov = Eigen::MatrixXd::Zero(dim, dim);

  for (int k = 0; k < n; ++k) {
    out.mean[k].resize(sched.m[k]);
    for (int l = 0; l < sched.m[k]; ++l)
      out.mean[k][l] = scale * table.one_time[k][l];
  }

  // same-time blocks
  for (int k = 0; k < n; ++k) {
    const int off = sched.cell_offset(k);
    for (int l = 0; l < sched.m[k]; ++l) {
      const double pl = table.one_time[k][l];
      if (size.is_known()) {
        for (int l2 = 0; l2 < sched.m[k]; ++l2) {
          const double pl2 = table.one_time[k][l2];
          // group the probability product so (l,l2) and (l2,l) agree
          // to the last bit
          double c =
              (l == l2) ? scale * (pl - pl * pl2) : -scale * (pl * pl2);
          out.cov(off + l, off + l2) = c;
        }
      } else {
        out.cov(off + l, off + l) = scale * pl;
      }
    }
  }

  // cross-time blocks, mirrored for exact symmetry
  for (int k = 0; k < n; ++k) {
    for (int k2 = k + 1; k2 < n; ++k2) {
      const Eigen::MatrixXd& pkk = table.pair(k, k2);
      const int off = sched.cell_offset(k);
      const int off2 = sched.cell_offset(k2);
      for (int l = 0; l < sched.m[k]; ++l) {
        for (int l2 = 0; l2 < sched.m[k2]; ++l2) {
          double c;
          if (size.is_known()) {
            c = scale * (pkk(l, l2) -
                         table.one_time[k][l] * table.one_time[k2][l2]);
          } else {
            c = scale * pkk(l, l2);
          }
          out.cov(off + l, off2 + l2) = c;
          out.cov(off2 + l2, off + l) = c;
        }
      }
    }
  }
  return out;
}

}  // namespace ecm
