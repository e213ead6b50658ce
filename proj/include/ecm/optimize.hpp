#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace ecm::opt {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  void validate() const;
  Eigen::VectorXd clamp(const Eigen::VectorXd& x) const;
};

struct MinimizeOptions {
  int max_iterations = 500;
  // Central-difference gradient step, relative to max(1, |x_i|).
  double grad_rel_step = 1e-6;
  // Stop when the projected-gradient infinity norm falls below this.
  double pg_tol = 1e-8;
  // Or when the relative objective decrease falls below this.
  double rel_f_tol = 1e-12;
  double armijo_c1 = 1e-4;
  int max_backtracks = 45;
};

struct MinimizeResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string status;
};

// Box-constrained quasi-Newton minimization with numerical gradients:
// BFGS inverse-Hessian updates, backtracking line search along the
// projected path clamp(x + a d), monotone decrease.  Objectives may
// return non-finite values for infeasible points; the search treats
// them as +inf.  Status strings: "converged-pg", "converged-f",
// "max-iterations", "line-search-failure", "start-infeasible".
MinimizeResult minimize_box(const Objective& f, const Eigen::VectorXd& x0,
                            const Box& box,
                            const MinimizeOptions& opts = {});

// Central-difference Hessian with per-coordinate step
// rel_step * max(1, |x_i|).  Entries can be non-finite if the
// objective is; callers decide how to treat that.  Adds the number of
// objective calls to *evaluations when given.
Eigen::MatrixXd fd_hessian(const Objective& f, const Eigen::VectorXd& x,
                           double rel_step, int* evaluations = nullptr);

}  // namespace ecm::opt
