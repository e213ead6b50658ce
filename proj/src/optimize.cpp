#include "ecm/optimize.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ecm::opt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sanitized(double v) { return std::isfinite(v) ? v : kInf; }

}  // namespace

void Box::validate() const {
  if (lower.size() != upper.size() || lower.size() == 0)
    throw std::invalid_argument("box: bound vectors must match and be nonempty");
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) ||
        lower[i] > upper[i])
      throw std::invalid_argument("box: need finite lower <= upper");
  }
}

Eigen::VectorXd Box::clamp(const Eigen::VectorXd& x) const {
  return x.cwiseMax(lower).cwiseMin(upper);
}

MinimizeResult minimize_box(const Objective& f, const Eigen::VectorXd& x0,
                            const Box& box, const MinimizeOptions& opts) {
  box.validate();
  if (x0.size() != box.lower.size())
    throw std::invalid_argument("minimize_box: start dimension mismatch");
  const Eigen::Index n = x0.size();

  MinimizeResult res;
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    return sanitized(f(x));
  };

  Eigen::VectorXd x = box.clamp(x0);
  double fx = eval(x);
  if (!std::isfinite(fx)) {
    res.x = x;
    res.f = fx;
    res.evaluations = evals;
    res.status = "start-infeasible";
    return res;
  }

  // Central differences, falling back to the finite side when a probe
  // point lands outside the objective's finite domain.
  auto gradient = [&](const Eigen::VectorXd& at, double f_at) {
    Eigen::VectorXd g(n);
    Eigen::VectorXd probe = at;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double h = opts.grad_rel_step * std::max(1.0, std::fabs(at[i]));
      probe[i] = at[i] + h;
      const double fp = eval(probe);
      probe[i] = at[i] - h;
      const double fm = eval(probe);
      probe[i] = at[i];
      if (std::isfinite(fp) && std::isfinite(fm))
        g[i] = (fp - fm) / (2.0 * h);
      else if (std::isfinite(fp))
        g[i] = (fp - f_at) / h;
      else if (std::isfinite(fm))
        g[i] = (f_at - fm) / h;
      else
        g[i] = 0.0;
    }
    return g;
  };

  auto projected_gradient_norm = [&](const Eigen::VectorXd& at,
                                     const Eigen::VectorXd& g) {
    double norm = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double gi = g[i];
      if (at[i] <= box.lower[i])
        gi = std::min(gi, 0.0);
      else if (at[i] >= box.upper[i])
        gi = std::max(gi, 0.0);
      norm = std::max(norm, std::fabs(gi));
    }
    return norm;
  };

  Eigen::VectorXd g = gradient(x, fx);
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  // While H is a bare identity the direction is the raw gradient, whose
  // magnitude reflects the objective's scale, not a sensible step.  Cap
  // the first trial step at unit length until a curvature pair rescales
  // the metric, as in L-BFGS-B; otherwise a steep start can jump across
  // the basin onto a far plateau that a short line search cannot leave.
  bool metric_fresh = true;

  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    res.iterations = iter;
    if (projected_gradient_norm(x, g) < opts.pg_tol) {
      res.converged = true;
      res.status = "converged-pg";
      break;
    }

    Eigen::VectorXd d = -(H * g);
    bool reset_done = false;
    Eigen::VectorXd x_new;
    double f_new = kInf;
    bool accepted = false;

    while (true) {
      double a = metric_fresh ? 1.0 / std::max(1.0, d.norm()) : 1.0;
      for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
        Eigen::VectorXd cand = box.clamp(x + a * d);
        Eigen::VectorXd step = cand - x;
        if (step.isZero(0.0)) break;  // direction fully blocked by the box
        const double fc = eval(cand);
        // Armijo on the actually-taken (projected) step.
        if (std::isfinite(fc) &&
            fc <= fx + opts.armijo_c1 * g.dot(step)) {
          x_new = std::move(cand);
          f_new = fc;
          accepted = true;
          break;
        }
        a *= 0.5;
      }
      if (accepted || reset_done) break;
      // Retry once along steepest descent with a fresh metric.
      H.setIdentity();
      metric_fresh = true;
      d = -g;
      reset_done = true;
    }

    if (!accepted) {
      res.status = "line-search-failure";
      break;
    }

    Eigen::VectorXd g_new = gradient(x_new, f_new);
    Eigen::VectorXd s = x_new - x;
    Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (metric_fresh) {
        // Scale the identity to the observed curvature before the
        // first update so step lengths start in the right regime.
        H *= sy / y.squaredNorm();
        metric_fresh = false;
      }
      // Standard BFGS inverse update.
      const double rho = 1.0 / sy;
      Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      Eigen::MatrixXd V = I - rho * s * y.transpose();
      H = V * H * V.transpose() + rho * s * s.transpose();
    }

    const double drop = fx - f_new;
    x = std::move(x_new);
    fx = f_new;
    g = std::move(g_new);

    if (drop <= opts.rel_f_tol * std::max(1.0, std::fabs(fx))) {
      res.converged = true;
      res.status = "converged-f";
      break;
    }
  }

  if (res.status.empty()) res.status = "max-iterations";
  res.x = x;
  res.f = fx;
  res.evaluations = evals;
  return res;
}

Eigen::MatrixXd fd_hessian(const Objective& f, const Eigen::VectorXd& x,
                           double rel_step, int* evaluations) {
  const Eigen::Index n = x.size();
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& p) {
    ++evals;
    return f(p);
  };
  Eigen::VectorXd h(n);
  for (Eigen::Index i = 0; i < n; ++i)
    h[i] = rel_step * std::max(1.0, std::fabs(x[i]));
  const double f0 = eval(x);
  Eigen::MatrixXd H(n, n);
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    probe[i] = x[i] + h[i];
    const double fp = eval(probe);
    probe[i] = x[i] - h[i];
    const double fm = eval(probe);
    probe[i] = x[i];
    H(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      probe[i] = x[i] + h[i];
      probe[j] = x[j] + h[j];
      const double fpp = eval(probe);
      probe[j] = x[j] - h[j];
      const double fpm = eval(probe);
      probe[i] = x[i] - h[i];
      const double fmm = eval(probe);
      probe[j] = x[j] + h[j];
      const double fmp = eval(probe);
      probe[i] = x[i];
      probe[j] = x[j];
      H(i, j) = H(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
    }
  }
  if (evaluations != nullptr) *evaluations += evals;
  return H;
}

}  // namespace ecm::opt
