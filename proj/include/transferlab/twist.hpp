#pragma once

#include <cstdint>
#include <vector>

#include "transferlab/sparse.hpp"
#include "transferlab/ulam.hpp"

namespace transferlab {

/// Largest twist magnitude accepted by default; exp(z*g) with the bounded
/// benchmark observables stays far from overflow at this size.
inline constexpr double kDefaultZMax = 20.0;

/// Twisted transfer matrix with entries base(i,j) * exp(z * g[i]); the twist
/// weight is evaluated at the SOURCE (row) cell.
///
/// Stored in factored form: the explicit matrix holds the row-rescaled
/// entries base(i,j) * exp(z*g[i] - c) with c = max_i z*g[i] kept separately
/// (log_scale). The scaled leading eigenvalue then stays O(1) for every z,
/// which keeps absolute power-iteration tolerances meaningful even where the
/// true eigenvalue is of order exp(17) (e.g. along the indicator observable's
/// rate-function sweep). True-scale quantities are recovered as
/// lambda = exp(log_scale) * lambda_scaled.
class TwistedMatrix {
 public:
  TwistedMatrix() = default;

  std::int64_t n() const { return scaled_.n(); }
  double z() const { return z_; }
  /// c = max_i z*g[i]; the factored-out log magnitude.
  double log_scale() const { return log_scale_; }
  /// The explicitly stored matrix with entries base(i,j)*exp(z*g[i] - c).
  const SparseCsr& scaled() const { return scaled_; }
  /// Twist weights per cell (copy of the observable values used).
  const std::vector<double>& g() const { return g_; }

  /// Contractual entry base(i,j) * exp(z*g[i]), reassembled from the factored
  /// storage.
  double entry(std::int64_t i, std::int64_t j) const;

 private:
  friend TwistedMatrix twist(const TransferMatrix& base,
                             const DiscretizedObservable& g, double z,
                             double z_max);

  SparseCsr scaled_;
  std::vector<double> g_;
  double z_ = 0.0;
  double log_scale_ = 0.0;
};

/// Builds the twisted matrix with entries base(i,j) * exp(z * g[i]).
/// For derivative and rate-function work g should be centered against the
/// base matrix's invariant density (center_against); uncentered g is accepted
/// (the first-derivative identity then returns the mean of g instead of 0).
/// Throws when |z| > z_max or when exp(z*g) would overflow.
TwistedMatrix twist(const TransferMatrix& base, const DiscretizedObservable& g,
                    double z, double z_max = kDefaultZMax);

/// Leading eigen-triple (lambda, right v, left phi) of a twisted matrix by
/// power iteration on the factored storage, both sides. Normalization:
/// sum(v)/n = 1 and phi^T v / n = 1. warm_start supplies initial iterates
/// (vectors only; its scalars are ignored). lambda and log_lambda are
/// true-scale. iterations is summed over both sides; residual is the larger
/// of the two final eigenvalue increments.
SpectralData leading_eigendata(const TwistedMatrix& tm,
                               const SpectralData* warm_start = nullptr,
                               double tol = kDefaultEigTol,
                               std::int64_t max_iter = kDefaultEigMaxIter,
                               int threads = 1);

/// Untwisted convenience overload: leading eigendata of the base matrix
/// itself (lambda = 1 for a Markov matrix, v = invariant density, phi = 1).
SpectralData leading_eigendata(const TransferMatrix& m,
                               const SpectralData* warm_start = nullptr,
                               double tol = kDefaultEigTol,
                               std::int64_t max_iter = kDefaultEigMaxIter,
                               int threads = 1);

/// Exact derivative of the leading eigenvalue in z (no finite differencing):
/// lambda'(z) = lambda(z) * phi^T (g (.) v) / n.
double lambda_prime(const TwistedMatrix& tm, const SpectralData& sd);

/// Second derivative via the derivative-free resolvent formula:
///   lambda''(z) = lambda * [ phi((g^2) v) + 2 phi(g * R L (Id - Pi)(g v)) ]
/// with R the reduced resolvent (lambda - L)^{-1} on the complement of the
/// leading projection Pi, evaluated through one bordered sparse solve. All
/// pairings phi(h) are phi^T h / n. The solve is performed on the factored
/// storage: (lambda - L)^{-1} L is scale-invariant.
double lambda_second_general(const TwistedMatrix& tm, const SpectralData& sd);

/// Sampled eigenvalue curve z -> (lambda, ln lambda, lambda', lambda'').
struct TwistSpectralCurve {
  std::vector<double> z_values;
  std::vector<double> lambda;
  std::vector<double> log_lambda;
  std::vector<double> lambda_prime;
  std::vector<double> lambda_second;
  /// Per-point eigendata, retained only when requested.
  std::vector<SpectralData> eigendata;
};

/// Evaluates the spectral curve over z_values in order, warm-starting each
/// point from the previous one's eigenvectors.
TwistSpectralCurve twist_curve(const TransferMatrix& base,
                               const DiscretizedObservable& g,
                               const std::vector<double>& z_values,
                               double tol = kDefaultEigTol,
                               double z_max = kDefaultZMax,
                               bool keep_eigendata = false, int threads = 1);

}  // namespace transferlab
