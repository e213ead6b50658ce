#include "ecm/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "ecm/logspace.hpp"
#include "ecm/moments.hpp"
#include "ecm/pair_pmf.hpp"

namespace ecm::infer {

namespace {

constexpr double kNegInfV = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void check_alignment(const CountArrangement& counts,
                     const PathProbabilityTable& table) {
  require(counts.schedule.m == table.schedule.m,
          "counts and table follow different schedules");
}

}  // namespace

double to_natural(Transform t, double v) {
  switch (t) {
    case Transform::kIdentity:
      return v;
    case Transform::kLog:
      return std::exp(v);
    case Transform::kLogit:
      return 1.0 / (1.0 + std::exp(-v));
    case Transform::kNegLog:
      return -std::exp(v);
  }
  throw std::logic_error("unknown transform");
}

double to_transformed(Transform t, double v) {
  switch (t) {
    case Transform::kIdentity:
      return v;
    case Transform::kLog:
      require(v > 0.0, "log transform needs a positive value");
      return std::log(v);
    case Transform::kLogit:
      require(v > 0.0 && v < 1.0, "logit transform needs a value in (0,1)");
      return std::log(v / (1.0 - v));
    case Transform::kNegLog:
      require(v < 0.0, "neg-log transform needs a negative value");
      return std::log(-v);
  }
  throw std::logic_error("unknown transform");
}

void ParamSpace::validate() const {
  require(!names.empty(), "parameter space: no parameters");
  require(transforms.size() == names.size(),
          "parameter space: one transform per parameter");
  box.validate();
  require(box.lower.size() == static_cast<Eigen::Index>(names.size()),
          "parameter space: box dimension mismatch");
  require(!starts.empty(), "parameter space: need at least one start");
  for (const auto& s : starts) {
    require(s.size() == box.lower.size(),
            "parameter space: start dimension mismatch");
    for (Eigen::Index i = 0; i < s.size(); ++i)
      require(box.lower[i] <= s[i] && s[i] <= box.upper[i],
              "parameter space: start outside the box");
  }
}

Eigen::VectorXd ParamSpace::natural(const Eigen::VectorXd& t) const {
  Eigen::VectorXd out(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i)
    out[i] = to_natural(transforms[i], t[i]);
  return out;
}

Eigen::VectorXd ParamSpace::transformed(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out[i] = to_transformed(transforms[i], v[i]);
  return out;
}

double gaussian_pseudo_loglik(const CountArrangement& counts,
                              const PathProbabilityTable& table,
                              const PopulationSize& size) {
  check_alignment(counts, table);
  const MeanCov mc = ecm_mean_cov(table, size);
  const int d = counts.schedule.total_cells();

  Eigen::VectorXd r(d);
  for (int k = 0; k < counts.schedule.n_times(); ++k) {
    const int off = counts.schedule.cell_offset(k);
    for (int l = 0; l < counts.schedule.m[k]; ++l)
      r[off + l] =
          static_cast<double>(counts.counts[k][l]) - mc.mean[k][l];
  }

  // Jitter ladder: tiny diagonal lift when near-degenerate cells make
  // the exact covariance numerically indefinite.
  Eigen::MatrixXd sym = 0.5 * (mc.cov + mc.cov.transpose());
  const double unit = sym.trace() / static_cast<double>(d);
  Eigen::LLT<Eigen::MatrixXd> llt;
  bool ok = false;
  for (double jitter = 0.0; !ok;) {
    Eigen::MatrixXd work = sym;
    if (jitter > 0.0)
      work.diagonal().array() += jitter;
    llt.compute(work);
    if (llt.info() == Eigen::Success) {
      ok = true;
      break;
    }
    if (jitter == 0.0)
      jitter = 1e-10 * unit;
    else
      jitter *= 10.0;
    if (!(jitter > 0.0) || jitter > 1e-6 * unit * 1.0000001) break;
  }
  if (!ok) return kNegInfV;

  const Eigen::MatrixXd& L = llt.matrixLLT();
  double logdet = 0.0;
  for (int i = 0; i < d; ++i) logdet += 2.0 * std::log(L(i, i));
  const Eigen::VectorXd w = llt.solve(r);
  const double quad = r.dot(w);
  const double out = -0.5 * (d * kLog2Pi + logdet + quad);
  return std::isfinite(out) ? out : kNegInfV;
}

double pairwise_composite_loglik(const CountArrangement& counts,
                                 const PathProbabilityTable& table,
                                 const PopulationSize& size) {
  check_alignment(counts, table);
  const int n = counts.schedule.n_times();
  const bool known = size.is_known();
  const std::int64_t N = known ? size.count() : 0;
  const double lambda = known ? 0.0 : size.rate();

  double total = 0.0;
  // Same-time category pairs.
  for (int k = 0; k < n; ++k) {
    const auto& q = counts.counts[k];
    const auto& p = table.one_time[k];
    const int m = counts.schedule.m[k];
    for (int l = 0; l < m; ++l)
      for (int l2 = l + 1; l2 < m; ++l2) {
        if (known)
          total += multinomial_pair_logpmf(q[l], q[l2], N, p[l], p[l2]);
        else
          total += poisson_logpmf(q[l], lambda * p[l]) +
                   poisson_logpmf(q[l2], lambda * p[l2]);
        if (total == kNegInfV) return kNegInfV;
      }
  }
  // Cross-time cell pairs.
  for (int k = 0; k < n; ++k)
    for (int k2 = k + 1; k2 < n; ++k2) {
      const Eigen::MatrixXd& pp = table.pair(k, k2);
      const auto& qk = counts.counts[k];
      const auto& qk2 = counts.counts[k2];
      for (int l = 0; l < counts.schedule.m[k]; ++l)
        for (int l2 = 0; l2 < counts.schedule.m[k2]; ++l2) {
          if (known)
            total += bivariate_binomial_logpmf(
                qk[l], qk2[l2], N, pp(l, l2), table.one_time[k][l],
                table.one_time[k2][l2]);
          else
            total += bivariate_poisson_logpmf(
                qk[l], qk2[l2], lambda * pp(l, l2),
                lambda * table.one_time[k][l],
                lambda * table.one_time[k2][l2]);
          if (total == kNegInfV) return kNegInfV;
        }
    }
  return total;
}

namespace {

double objective_value(EstimatorKind kind, const CountArrangement& counts,
                       const ModelBinding& binding,
                       const ParamSpace& space,
                       const Eigen::VectorXd& transformed) {
  Eigen::VectorXd nat = space.natural(transformed);
  try {
    PathProbabilityTable table = binding.table(nat);
    PopulationSize size = binding.size(nat);
    const double ll = kind == EstimatorKind::kGaussian
                          ? gaussian_pseudo_loglik(counts, table, size)
                          : pairwise_composite_loglik(counts, table, size);
    return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
  } catch (const std::exception&) {
    // Extreme proposals can break table invariants; treat as infeasible.
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

FitResult fit(EstimatorKind kind, const CountArrangement& counts,
              const ModelBinding& binding, const ParamSpace& space,
              const opt::MinimizeOptions& opts) {
  space.validate();
  counts.validate();

  auto f = [&](const Eigen::VectorXd& t) {
    return objective_value(kind, counts, binding, space, t);
  };

  FitResult res;
  res.names = space.names;
  int best = -1;
  int total_evals = 0;
  for (int si = 0; si < static_cast<int>(space.starts.size()); ++si) {
    StartOutcome oc;
    oc.start_index = si;
    oc.run = opt::minimize_box(f, space.starts[si], space.box, opts);
    total_evals += oc.run.evaluations;
    if (std::isfinite(oc.run.f) &&
        (best < 0 || oc.run.f < res.starts[best].run.f))
      best = si;
    res.starts.push_back(std::move(oc));
  }
  if (best < 0)
    throw std::runtime_error("fit: no start reached a finite objective");

  const opt::MinimizeResult& win = res.starts[best].run;
  res.winner_start = best;
  res.x_transformed = win.x;
  res.x_natural = space.natural(win.x);
  res.loglik = -win.f;
  res.iterations = win.iterations;

  // Curvature at the winner, transformed scale, minimization sign.
  Eigen::MatrixXd H =
      opt::fd_hessian(f, win.x, kHessianRelStep, &total_evals);
  res.evaluations = total_evals;
  res.hessian = H;
  if (H.allFinite()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    res.min_hessian_eigenvalue = es.eigenvalues().minCoeff();
  } else {
    res.min_hessian_eigenvalue = kNegInfV;
  }
  res.erratic = res.min_hessian_eigenvalue < kErraticEigThreshold;
  return res;
}

double percentile(std::vector<double> values, double p) {
  require(!values.empty(), "percentile of an empty sample");
  require(p >= 0.0 && p <= 100.0, "percentile level must be in [0,100]");
  std::sort(values.begin(), values.end());
  const double pos = (p / 100.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

BootstrapResult parametric_bootstrap(const FitResult& fitted,
                                     const Regenerator& regen,
                                     EstimatorKind kind,
                                     const ModelBinding& binding,
                                     const ParamSpace& space, int n,
                                     std::uint64_t base_seed, int jobs,
                                     const opt::MinimizeOptions& opts) {
  require(n >= 0, "bootstrap size must be >= 0");
  require(jobs >= 1, "jobs must be >= 1");
  require(!fitted.erratic, "bootstrap requires a non-erratic fit");
  space.validate();

  BootstrapResult out;
  out.n_requested = n;
  const int d = space.dim();
  out.samples.resize(0, d);
  out.ci_lower = Eigen::VectorXd::Constant(d, std::nan(""));
  out.ci_upper = Eigen::VectorXd::Constant(d, std::nan(""));
  if (n == 0) return out;

  const int pool = static_cast<int>(std::ceil(n * 1.045));
  struct Rep {
    bool ok = false;
    Eigen::VectorXd natural;
  };
  std::vector<Rep> reps(pool);

  auto run_one = [&](int r) {
    RngStream stream = RngStream::derive(base_seed, {0xB007, static_cast<std::uint64_t>(r)});
    try {
      CountArrangement sim = regen(fitted.x_natural, stream);
      FitResult rf = fit(kind, sim, binding, space, opts);
      if (!rf.erratic) {
        reps[r].ok = true;
        reps[r].natural = rf.x_natural;
      }
    } catch (const std::exception&) {
      // Failed refit counts as dropped, same as an erratic one.
    }
  };

  if (jobs == 1) {
    for (int r = 0; r < pool; ++r) run_one(r);
  } else {
    std::vector<std::thread> workers;
    std::atomic<int> next{0};
    for (int w = 0; w < jobs; ++w)
      workers.emplace_back([&]() {
        for (int r = next.fetch_add(1); r < pool; r = next.fetch_add(1))
          run_one(r);
      });
    for (auto& t : workers) t.join();
  }

  std::vector<const Eigen::VectorXd*> kept;
  for (const Rep& rep : reps) {
    if (rep.ok) kept.push_back(&rep.natural);
    if (static_cast<int>(kept.size()) == n) break;
  }
  out.n_retained = static_cast<int>(kept.size());
  out.low_retention = out.n_retained < (n + 1) / 2;

  out.samples.resize(out.n_retained, d);
  for (int i = 0; i < out.n_retained; ++i) out.samples.row(i) = *kept[i];
  if (out.n_retained > 0) {
    for (int j = 0; j < d; ++j) {
      std::vector<double> col(out.n_retained);
      for (int i = 0; i < out.n_retained; ++i) col[i] = out.samples(i, j);
      out.ci_lower[j] = percentile(col, 2.5);
      out.ci_upper[j] = percentile(col, 97.5);
    }
  }
  return out;
}

}  // namespace ecm::infer
