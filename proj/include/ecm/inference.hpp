#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ecm/optimize.hpp"
#include "ecm/rng.hpp"
#include "ecm/types.hpp"

namespace ecm::infer {

// Per-parameter reparametrization.  Optimization always runs in the
// transformed scale; bounds and starts are given there too.
enum class Transform { kIdentity, kLog, kLogit, kNegLog };

double to_natural(Transform t, double transformed);
double to_transformed(Transform t, double natural);

struct ParamSpace {
  std::vector<std::string> names;
  std::vector<Transform> transforms;
  opt::Box box;  // transformed scale
  std::vector<Eigen::VectorXd> starts;  // transformed scale, inside the box

  int dim() const { return static_cast<int>(names.size()); }
  void validate() const;
  Eigen::VectorXd natural(const Eigen::VectorXd& transformed) const;
  Eigen::VectorXd transformed(const Eigen::VectorXd& natural) const;
};

// Gaussian pseudo-log-likelihood: the exact count mean/covariance
// plugged into a multivariate normal log-density at the observed
// counts.  A covariance that fails Cholesky gets diagonal jitter
// 1e-10*trace/dim, escalated tenfold up to 1e-6*trace/dim; past that
// the objective is -inf (reported, not fatal).
double gaussian_pseudo_loglik(const CountArrangement& counts,
                              const PathProbabilityTable& table,
                              const PopulationSize& size);

// Pairwise composite log-likelihood: sum over same-time category pairs
// (l < l') and over all cross-time cell pairs (k < k').  Fixed N uses
// trinomial and bivariate-binomial terms; Poisson N uses independent
// Poisson and bivariate-Poisson terms.  Structurally impossible pairs
// contribute -inf.
double pairwise_composite_loglik(const CountArrangement& counts,
                                 const PathProbabilityTable& table,
                                 const PopulationSize& size);

enum class EstimatorKind { kGaussian, kComposite };

// Maps natural-scale parameters to the model objects the objectives
// need.  Movement fits build tables from (tau, sigma, z); raw-table
// fits parametrize probabilities directly.
struct ModelBinding {
  std::function<PathProbabilityTable(const Eigen::VectorXd&)> table;
  std::function<PopulationSize(const Eigen::VectorXd&)> size;
};

struct StartOutcome {
  int start_index = 0;
  opt::MinimizeResult run;
};

struct FitResult {
  std::vector<std::string> names;
  Eigen::VectorXd x_transformed;
  Eigen::VectorXd x_natural;
  double loglik = 0.0;  // objective value at the optimum
  // Finite-difference Hessian of the NEGATIVE log-likelihood in the
  // transformed scale (relative step 1e-4), so a regular interior
  // optimum has positive eigenvalues.
  Eigen::MatrixXd hessian;
  double min_hessian_eigenvalue = 0.0;
  // Degenerate-curvature flag: min eigenvalue < 1e-12.  A Hessian with
  // non-finite entries counts as erratic (eigenvalue reported -inf).
  bool erratic = false;
  int winner_start = -1;
  int iterations = 0;    // winner's
  int evaluations = 0;   // total across starts + Hessian
  std::vector<StartOutcome> starts;
};

inline constexpr double kErraticEigThreshold = 1e-12;
inline constexpr double kHessianRelStep = 1e-4;

// Multi-start box-constrained fit.  Throws std::runtime_error if every
// start fails to reach a finite objective.  Ties between equally good
// starts go to the lowest start index.
FitResult fit(EstimatorKind kind, const CountArrangement& counts,
              const ModelBinding& binding, const ParamSpace& space,
              const opt::MinimizeOptions& opts = {});

// Builds a dataset from natural-scale parameters; the stream is the
// replicate's own derived stream.
using Regenerator =
    std::function<CountArrangement(const Eigen::VectorXd&, RngStream&)>;

struct BootstrapResult {
  Eigen::MatrixXd samples;  // retained replicates x parameters, natural scale
  Eigen::VectorXd ci_lower;  // 2.5% percentile per parameter
  Eigen::VectorXd ci_upper;  // 97.5% percentile per parameter
  int n_requested = 0;
  int n_retained = 0;
  bool low_retention = false;  // retained < n_requested / 2
};

// Parametric bootstrap at the fitted point: simulates ceil(n * 1.045)
// candidate datasets (erratic refits are dropped, the overdraw covers
// the expected loss), refits each with the same multi-start protocol,
// keeps the first n good ones in replicate order, and reports 95%
// percentile intervals.  `jobs` > 1 refits replicates concurrently;
// results are identical for any job count because every replicate uses
// a stream derived from (base_seed, replicate index).
BootstrapResult parametric_bootstrap(const FitResult& fitted,
                                     const Regenerator& regen,
                                     EstimatorKind kind,
                                     const ModelBinding& binding,
                                     const ParamSpace& space, int n,
                                     std::uint64_t base_seed, int jobs = 1,
                                     const opt::MinimizeOptions& opts = {});

// Percentile with linear interpolation between order statistics,
// exposed for the result-reporting paths.
double percentile(std::vector<double> values, double p);

}  // namespace ecm::infer
