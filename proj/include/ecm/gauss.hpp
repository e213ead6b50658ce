#pragma once

#include <limits>

namespace ecm::gauss {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// One axis of an axis-aligned rectangle; +-inf ends are legal and mean
// a genuinely unbounded side (no large-sentinel convention).
struct Interval {
  double lo;
  double hi;
};

struct Rect2D {
  Interval x;
  Interval y;
};

// Standard normal CDF, absolute error < 1e-15 (complementary error
// function form, stable in both tails).
double std_normal_cdf(double x);
double std_normal_pdf(double x);

// P(lo < Z <= hi) for standard normal Z, computed in whichever tail is
// better conditioned.
double normal_interval_prob(double lo, double hi);

// Reusable quadrature geometry for a fixed correlation.  The single
// integral over the correlation parameter (Drezner-Wesolowsky
// reduction, with the transformed near-singular variant for
// |rho| >= 0.925) uses Gauss-Legendre nodes chosen by |rho| band; the
// node positions depend only on rho, so batch callers evaluating many
// rectangles at one correlation build the context once.
class BvnContext {
 public:
  explicit BvnContext(double rho);

  double rho() const { return rho_; }
  // P(X > h, Y > k), finite arguments only.
  double upper(double h, double k) const;

 private:
  double rho_;
  bool singular_branch_;
  int n_nodes_;
  double nodes_[20];    // branch 1: sn; branch 2: xs
  double aux_[20];      // branch 1: 1-sn^2; branch 2: sqrt(1-xs)
  double weights_[20];  // scaled quadrature weights
  double scale_;        // branch 1: asin(rho); branch 2: sqrt(1-rho^2)/2
};

// P(Z1 in a, Z2 in b) for standard bivariate normal with correlation
// rho, |rho| <= 1.  Absolute error < 1e-10; clamped to [0,1].
// |rho| > 1-1e-12 is evaluated by the exact degenerate limit
// P(Z in a n +-b) because correlations at tiny time lags approach 1.
double bvn_rect(const Interval& a, const Interval& b, double rho);
// Batch form reusing a prebuilt context (must satisfy |rho| <= 1-1e-12).
double bvn_rect(const BvnContext& ctx, const Interval& a, const Interval& b);

// General-mean/sd wrapper: standardizes and delegates to bvn_rect.
double gaussian_rect_prob(double mean_x, double mean_y, double sd_x,
                          double sd_y, double rho, const Rect2D& rect);

}  // namespace ecm::gauss
