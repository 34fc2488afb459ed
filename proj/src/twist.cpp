#include "transferlab/twist.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "transferlab/errors.hpp"

namespace transferlab {

namespace {

// exp argument beyond which doubles overflow.
constexpr double kExpOverflow = 700.0;

std::vector<double> ones(std::int64_t n) {
  return std::vector<double>(static_cast<std::size_t>(n), 1.0);
}

// Shared eigensolve on an explicitly stored matrix whose true-scale
// eigenvalue is exp(log_scale) times the stored one.
SpectralData eigendata_of(const SparseCsr& m, double log_scale,
                          const SpectralData* warm_start, double tol,
                          std::int64_t max_iter, int threads) {
  const std::int64_t n = m.n();
  std::vector<double> v0 = ones(n), phi0 = ones(n);
  if (warm_start != nullptr) {
    if (static_cast<std::int64_t>(warm_start->right.size()) != n ||
        static_cast<std::int64_t>(warm_start->left.size()) != n)
      throw Error("twist", "warm-start vectors have dimension " +
                               std::to_string(warm_start->right.size()) +
                               ", matrix has " + std::to_string(n));
    v0 = warm_start->right;
    phi0 = warm_start->left;
  }
  PowerResult right =
      power_method(m, std::move(v0), Side::kRight, tol, max_iter, threads);
  PowerResult left =
      power_method(m, std::move(phi0), Side::kLeft, tol, max_iter, threads);
  if (!(right.lambda > 0.0))
    throw Error("twist",
                "leading eigenvalue of the twisted matrix is not positive; "
                "the matrix may not be a (re-weighted) transfer matrix");

  SpectralData sd;
  sd.right = std::move(right.vec);
  sd.left = std::move(left.vec);
  // power_method returns sum(vec) = n on both sides; re-pair the functional
  // side so that phi^T v / n = 1.
  const double pairing = neumaier_dot(sd.left, sd.right) / static_cast<double>(n);
  if (!(std::abs(pairing) > 1e-14))
    throw Error("twist",
                "left/right eigenvector pairing is numerically zero; the "
                "leading eigenvalue may not be simple");
  for (double& x : sd.left) x /= pairing;
  sd.lambda = std::exp(log_scale) * right.lambda;
  sd.log_lambda = log_scale + std::log(right.lambda);
  sd.iterations = right.iterations + left.iterations;
  sd.residual = std::max(right.residual, left.residual);
  return sd;
}

}  // namespace

double TwistedMatrix::entry(std::int64_t i, std::int64_t j) const {
  return scaled_.entry(i, j) * std::exp(log_scale_);
}

TwistedMatrix twist(const TransferMatrix& base, const DiscretizedObservable& g,
                    double z, double z_max) {
  const std::int64_t n = base.n();
  if (g.n() != n)
    throw Error("twist", "observable has " + std::to_string(g.n()) +
                             " cells, matrix has " + std::to_string(n));
  if (!(std::abs(z) <= z_max))
    throw Error("twist", "twist parameter z = " + std::to_string(z) +
                             " exceeds the configured bound z_max = " +
                             std::to_string(z_max));

  std::vector<double> w(static_cast<std::size_t>(n));
  double c = 0.0;  // z = 0 or empty g gives log_scale 0 and weights 1
  for (std::int64_t i = 0; i < n; ++i) {
    const double wi = z * g.values[static_cast<std::size_t>(i)];
    if (!std::isfinite(wi))
      throw Error("twist", "non-finite twist weight at cell " +
                               std::to_string(i));
    w[static_cast<std::size_t>(i)] = wi;
    if (i == 0 || wi > c) c = wi;
  }
  if (c > kExpOverflow)
    throw Error("twist",
                "exp(z*g) overflows; reduce |z| (max z*g = " +
                    std::to_string(c) + ")");

  std::vector<double> factor(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    factor[static_cast<std::size_t>(i)] =
        std::exp(w[static_cast<std::size_t>(i)] - c);

  TwistedMatrix tm;
  tm.scaled_ = base.csr().scale_rows(factor);
  tm.g_ = g.values;
  tm.z_ = z;
  tm.log_scale_ = c;
  return tm;
}

SpectralData leading_eigendata(const TwistedMatrix& tm,
                               const SpectralData* warm_start, double tol,
                               std::int64_t max_iter, int threads) {
  return eigendata_of(tm.scaled(), tm.log_scale(), warm_start, tol, max_iter,
                      threads);
}

SpectralData leading_eigendata(const TransferMatrix& m,
                               const SpectralData* warm_start, double tol,
                               std::int64_t max_iter, int threads) {
  return eigendata_of(m.csr(), 0.0, warm_start, tol, max_iter, threads);
}

double lambda_prime(const TwistedMatrix& tm, const SpectralData& sd) {
  const double n = static_cast<double>(tm.n());
  return sd.lambda * neumaier_dot3(sd.left, tm.g(), sd.right) / n;
}

double lambda_second_general(const TwistedMatrix& tm, const SpectralData& sd) {
  const std::int64_t n = tm.n();
  const double dn = static_cast<double>(n);
  const SparseCsr& s = tm.scaled();
  // Scaled leading eigenvalue: (lambda - L)^{-1} L is invariant under the
  // common factor exp(log_scale), so the whole solve runs on the factored
  // storage where lambda_s = O(1).
  const double lambda_s = std::exp(sd.log_lambda - tm.log_scale());

  // u = g (.) v, projected off the leading direction: h = u - (phi^T u / n) v.
  std::vector<double> u(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    u[static_cast<std::size_t>(i)] = tm.g()[static_cast<std::size_t>(i)] *
                                     sd.right[static_cast<std::size_t>(i)];
  const double mean_u = neumaier_dot(sd.left, u) / dn;
  std::vector<double> h(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    h[static_cast<std::size_t>(i)] =
        u[static_cast<std::size_t>(i)] -
        mean_u * sd.right[static_cast<std::size_t>(i)];

  // q = L (Id - Pi)(g v): density-side action is the transpose product.
  std::vector<double> q;
  s.apply_transpose(h, q);

  // Reduced resolvent via a bordered solve:
  //   [lambda_s I - S^T, v; phi^T, 0] (w, t) = (q, 0),
  // which pins phi^T w = 0 and is nonsingular exactly when lambda is simple.
  std::vector<Triplet> a_entries;
  a_entries.reserve(static_cast<std::size_t>(s.nnz() + n));
  const auto& rp = s.row_ptr();
  const auto& cols = s.cols();
  const auto& vals = s.values();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t k = rp[static_cast<std::size_t>(i)];
         k < rp[static_cast<std::size_t>(i) + 1]; ++k)
      a_entries.push_back({cols[static_cast<std::size_t>(k)], i,
                           -vals[static_cast<std::size_t>(k)]});
  for (std::int64_t i = 0; i < n; ++i) a_entries.push_back({i, i, lambda_s});

  detail::BorderedIterativeHint hint;
  hint.s = &s;
  hint.lambda_s = lambda_s;
  hint.sign = 1.0;
  hint.col_scale = 1.0;
  hint.v = &sd.right;
  hint.phi = &sd.left;

  const detail::GeneralBorderedSolution sol = detail::solve_bordered_general(
      n, a_entries, sd.right, sd.left, q,
      "the reduced-resolvent solve at z = " + std::to_string(tm.z()) +
          " (the spectral gap may have collapsed at this twist)", &hint);

  std::vector<double> gg(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    gg[static_cast<std::size_t>(i)] = tm.g()[static_cast<std::size_t>(i)] *
                                      tm.g()[static_cast<std::size_t>(i)];
  const double term_sq = neumaier_dot3(sd.left, gg, sd.right) / dn;
  const double term_res = neumaier_dot3(sd.left, tm.g(), sol.w) / dn;
  return sd.lambda * (term_sq + 2.0 * term_res);
}

TwistSpectralCurve twist_curve(const TransferMatrix& base,
                               const DiscretizedObservable& g,
                               const std::vector<double>& z_values, double tol,
                               double z_max, bool keep_eigendata, int threads) {
  TwistSpectralCurve curve;
  curve.z_values = z_values;
  curve.lambda.reserve(z_values.size());
  curve.log_lambda.reserve(z_values.size());
  curve.lambda_prime.reserve(z_values.size());
  curve.lambda_second.reserve(z_values.size());

  SpectralData warm;
  bool have_warm = false;
  for (double z : z_values) {
    const TwistedMatrix tm = twist(base, g, z, z_max);
    SpectralData sd = leading_eigendata(tm, have_warm ? &warm : nullptr, tol,
                                        kDefaultEigMaxIter, threads);
    curve.lambda.push_back(sd.lambda);
    curve.log_lambda.push_back(sd.log_lambda);
    curve.lambda_prime.push_back(lambda_prime(tm, sd));
    curve.lambda_second.push_back(lambda_second_general(tm, sd));
    warm = sd;
    have_warm = true;
    if (keep_eigendata) curve.eigendata.push_back(std::move(sd));
  }
  return curve;
}

}  // namespace transferlab
