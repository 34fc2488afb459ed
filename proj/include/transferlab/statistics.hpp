#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "transferlab/maps.hpp"
#include "transferlab/sparse.hpp"
#include "transferlab/twist.hpp"
#include "transferlab/ulam.hpp"

namespace transferlab {

/// Default first-order optimality tolerance of the rate-function minimizer.
inline constexpr double kDefaultOptTol = 1e-6;

/// Diffusion (CLT) variance of an observable, with the raw first and second
/// eigenvalue derivatives it was assembled from.
struct VarianceReport {
  double sigma2 = 0.0;  ///< ddlam - dlam^2
  double ddlam = 0.0;   ///< second derivative of lambda(z) at z = 0
  double dlam = 0.0;    ///< residual first derivative (near 0 after centering)
  std::int64_t n = 0;
  std::string observable;
  std::string map;
};

/// Variance sigma^2 = lambda''(0) - lambda'(0)^2 via the direct pipeline:
/// invariant density v, observable centered against v, one bordered solve
/// with right-hand side -P^T(g (.) v), then ddlam = (sum g^2 v + 2 sum g dv)/n.
/// Throws if sigma2 < -1e-10 or the centering residual |dlam| exceeds 1e-8.
VarianceReport variance(const TransferMatrix& p, const Observable& g,
                        double eig_tol = kDefaultEigTol, int threads = 1);

/// Independent route to the same number through the twisted-eigenvalue
/// second-derivative formula at z = 0 (d^2/dz^2 ln lambda). The two routes
/// must agree to 1e-8 relative; disagreement indicates an assembly bug.
double variance_via_second_derivative(const TransferMatrix& p,
                                      const Observable& g,
                                      double eig_tol = kDefaultEigTol,
                                      int threads = 1);

/// Controls for the rate-function minimizer.
struct RateOptions {
  double opt_tol = kDefaultOptTol;  ///< stop when |d/dz (ln lambda - z s)| <= opt_tol
  double eig_tol = kDefaultEigTol;  ///< inner power-iteration tolerance
  double z_lo = -30.0;              ///< search interval, clipped by the
  double z_hi = 30.0;               ///< exp-overflow guard
  std::int64_t max_evals = 200;     ///< eigensolve budget per grid point
  bool cold_start = false;  ///< z0 = 0 per point (parallelizable) instead of
                            ///< warm-starting from the previous optimizer
  int threads = 1;  ///< across points when cold_start, else inside solves
};

/// Large-deviation rate function r(s) = -min_z (ln lambda(z) - z s) on a grid
/// of s values, for the observable centered against the invariant density.
struct RateFunctionResult {
  std::vector<double> s_grid;
  std::vector<double> r;
  std::vector<double> z_star;  ///< optimizer per s, nondecreasing in s
  double z_lo = 0.0;           ///< z-interval actually searched
  double z_hi = 0.0;
  std::vector<std::int64_t> iterations;  ///< eigensolve evaluations per point
  /// True where the derivative had no sign change inside [z_lo, z_hi]: s is
  /// outside the attainable slope range and r holds the boundary estimate.
  std::vector<bool> saturated;
  /// True where the evaluation budget ran out; r holds the best iterate.
  std::vector<bool> failed;
  bool cold_start = false;
};

/// Minimizes f(z) = ln lambda(z) - z s per grid point by safeguarded Newton
/// on f' (exact eigenvalue derivatives, curvature from the resolvent
/// formula), with bisection fallback on a sign-change bracket. Grid points
/// run in ascending order, each warm-started from the previous optimizer,
/// unless options.cold_start.
RateFunctionResult rate_function(const std::vector<double>& s_grid,
                                 const TransferMatrix& p, const Observable& g,
                                 const RateOptions& options);
RateFunctionResult rate_function(const std::vector<double>& s_grid,
                                 const TransferMatrix& p, const Observable& g,
                                 double opt_tol = kDefaultOptTol);

/// Escape rate from a cell region: -ln of the leading eigenvalue of the
/// region x region submatrix (NOT re-normalized; the sub-stochastic defect is
/// the escaping mass).
struct EscapeReport {
  std::vector<std::int64_t> region;
  double lambda_sub = 0.0;
  double escape_rate = 0.0;  ///< +infinity when the region empties in one step
};

EscapeReport escape_rate(const TransferMatrix& p,
                         std::vector<std::int64_t> region,
                         double eig_tol = kDefaultEigTol, int threads = 1);

/// Indices of the 1-D cells [i/n, (i+1)/n) contained in [a, b], snapping
/// endpoints that miss a cell boundary by less than 1e-9 relative.
std::vector<std::int64_t> cells_in_interval(std::int64_t n, double a, double b);

/// |r(1 - 1e-15) - escape([0, 1/2])| for the half-interval indicator
/// observable, both sides run at tolerance 1e-13: the large-deviation route
/// and the restricted-operator route must agree to about twelve decimals.
double consistency_check_rate_vs_escape(const TransferMatrix& p,
                                        std::int64_t n);

}  // namespace transferlab
