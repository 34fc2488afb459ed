#include "transferlab/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "transferlab/errors.hpp"
#include "transferlab/parallel.hpp"

namespace transferlab {

namespace {

constexpr double kExpOverflow = 690.0;

// One evaluation of the twisted-eigenvalue curve: ln lambda and its first
// (and optionally second) z-derivative at one twist value.
struct CurveEval {
  double z = 0.0;
  double log_lambda = 0.0;
  double dlog = 0.0;   // d/dz ln lambda
  double ddlog = 0.0;  // d^2/dz^2 ln lambda
  bool has_second = false;
  SpectralData sd;
};

CurveEval eval_curve_point(const TransferMatrix& p,
                           const DiscretizedObservable& g, double z,
                           double twist_z_max, double eig_tol,
                           const SpectralData* warm, bool need_second,
                           int threads) {
  const TwistedMatrix tm = twist(p, g, z, twist_z_max);
  CurveEval e;
  e.z = z;
  e.sd = leading_eigendata(tm, warm, eig_tol, kDefaultEigMaxIter, threads);
  e.log_lambda = e.sd.log_lambda;
  e.dlog = lambda_prime(tm, e.sd) / e.sd.lambda;
  if (need_second) {
    e.ddlog = lambda_second_general(tm, e.sd) / e.sd.lambda - e.dlog * e.dlog;
    e.has_second = true;
  }
  return e;
}

struct RatePoint {
  double r = 0.0;
  double z_star = 0.0;
  std::int64_t evals = 0;
  bool saturated = false;
  bool failed = false;
  SpectralData final_sd;  // warm start for the next grid point
};

// Minimizes f(z) = ln lambda(z) - z s over [z_lo, z_hi]. f' = dlog - s is
// nondecreasing (convexity of ln lambda), so a one-directional march
// establishes a sign-change bracket or certifies saturation at a boundary;
// safeguarded Newton (bisection whenever the Newton step is unusable or
// leaves the bracket) then drives |f'| below opt_tol.
RatePoint solve_rate_point(const TransferMatrix& p,
                           const DiscretizedObservable& g, double s,
                           double z_init, const SpectralData* warm_in,
                           const RateOptions& opt, double z_lo, double z_hi,
                           double twist_z_max, int threads) {
  RatePoint out;
  SpectralData warm;
  const SpectralData* warm_ptr = nullptr;
  if (warm_in != nullptr) {
    warm = *warm_in;
    warm_ptr = &warm;
  }

  const auto evaluate = [&](double z, bool need_second) {
    CurveEval e = eval_curve_point(p, g, z, twist_z_max, opt.eig_tol, warm_ptr,
                                   need_second, threads);
    warm = e.sd;
    warm_ptr = &warm;
    ++out.evals;
    return e;
  };
  const auto finish = [&](const CurveEval& e) {
    out.z_star = e.z;
    out.r = s * e.z - e.log_lambda;
    out.final_sd = e.sd;
    return out;
  };

  double z = std::clamp(z_init, z_lo, z_hi);
  CurveEval cur = evaluate(z, false);
  CurveEval best = cur;
  double fp = cur.dlog - s;
  if (std::abs(fp) <= opt.opt_tol) return finish(cur);

  // March toward the root of the nondecreasing f'.
  const bool up = fp < 0.0;
  const double boundary = up ? z_hi : z_lo;
  double frontier = z;  // last march point; f' keeps its initial sign there
  double lo = z, hi = z;
  double step = 1.0;
  bool bracketed = false;
  while (out.evals < opt.max_evals) {
    if (frontier == boundary) {
      // f' keeps one sign on the whole interval: the minimum sits on the
      // boundary and s lies outside the attainable slope range.
      out.saturated = true;
      return finish(cur);
    }
    const double znext = up ? std::min(frontier + step, boundary)
                            : std::max(frontier - step, boundary);
    step *= 2.0;
    cur = evaluate(znext, false);
    fp = cur.dlog - s;
    if (std::abs(fp) < std::abs(best.dlog - s)) best = cur;
    if (std::abs(fp) <= opt.opt_tol) return finish(cur);
    if ((up && fp > 0.0) || (!up && fp < 0.0)) {
      lo = up ? frontier : znext;
      hi = up ? znext : frontier;
      bracketed = true;
      break;
    }
    frontier = znext;
  }
  if (!bracketed) {
    out.failed = true;
    return finish(best);
  }

  while (out.evals < opt.max_evals) {
    double cand = 0.5 * (lo + hi);
    if (cur.has_second && std::isfinite(cur.ddlog) && cur.ddlog > 0.0) {
      const double newton = cur.z - (cur.dlog - s) / cur.ddlog;
      if (std::isfinite(newton) && newton > lo && newton < hi) cand = newton;
    }
    cur = evaluate(cand, true);
    fp = cur.dlog - s;
    if (std::abs(fp) < std::abs(best.dlog - s)) best = cur;
    if (std::abs(fp) <= opt.opt_tol) return finish(cur);
    if (fp > 0.0)
      hi = cand;
    else
      lo = cand;
  }
  out.failed = true;
  return finish(best);
}

std::vector<double> elementwise_product(const std::vector<double>& a,
                                        const std::vector<double>& b) {
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] * b[i];
  return y;
}

}  // namespace

VarianceReport variance(const TransferMatrix& p, const Observable& g,
                        double eig_tol, int threads) {
  const std::int64_t n = p.n();
  const double dn = static_cast<double>(n);
  const SpectralData sd =
      leading_eigendata(p, nullptr, eig_tol, kDefaultEigMaxIter, threads);
  DiscretizedObservable dg =
      center_against(discretize_observable(g, n), sd.right);

  std::vector<double> rhs;
  p.csr().apply_transpose(elementwise_product(dg.values, sd.right), rhs,
                          threads);
  for (double& x : rhs) x = -x;
  const BorderedSolution bs = solve_bordered(p, sd.right, rhs);

  VarianceReport rep;
  rep.ddlam = (neumaier_dot3(dg.values, dg.values, sd.right) +
               2.0 * neumaier_dot(dg.values, bs.dv)) /
              dn;
  rep.dlam = bs.dlam;
  rep.sigma2 = rep.ddlam - rep.dlam * rep.dlam;
  rep.n = n;
  rep.observable = g.name();
  rep.map = p.map_name();
  if (!(rep.sigma2 >= -1e-10))
    throw Error("statistics", "computed variance " + std::to_string(rep.sigma2) +
                                  " is negative beyond roundoff for observable " +
                                  rep.observable);
  if (!(std::abs(rep.dlam) <= 1e-8))
    throw Error("statistics",
                "centering residual dlam = " + std::to_string(rep.dlam) +
                    " exceeds 1e-8; the eigensolve may not have converged");
  return rep;
}

double variance_via_second_derivative(const TransferMatrix& p,
                                      const Observable& g, double eig_tol,
                                      int threads) {
  const std::int64_t n = p.n();
  const SpectralData sd =
      leading_eigendata(p, nullptr, eig_tol, kDefaultEigMaxIter, threads);
  const DiscretizedObservable dg =
      center_against(discretize_observable(g, n), sd.right);
  const TwistedMatrix tm = twist(p, dg, 0.0);
  const double ratio = lambda_prime(tm, sd) / sd.lambda;
  return lambda_second_general(tm, sd) / sd.lambda - ratio * ratio;
}

RateFunctionResult rate_function(const std::vector<double>& s_grid,
                                 const TransferMatrix& p, const Observable& g,
                                 const RateOptions& options) {
  for (std::size_t i = 1; i < s_grid.size(); ++i)
    if (!(s_grid[i] >= s_grid[i - 1]))
      throw Error("statistics", "s_grid must be sorted ascending");
  if (!(options.z_lo < options.z_hi))
    throw Error("statistics", "empty z search interval");

  const std::int64_t n = p.n();
  const int threads = resolve_threads(options.threads);
  const SpectralData base_sd = leading_eigendata(
      p, nullptr, options.eig_tol, kDefaultEigMaxIter,
      options.cold_start ? 1 : threads);
  const DiscretizedObservable dg =
      center_against(discretize_observable(g, n), base_sd.right);

  // Clip the search interval so exp(z*g) cannot overflow.
  double gmax = 0.0;
  for (double x : dg.values) gmax = std::max(gmax, std::abs(x));
  double z_lo = options.z_lo, z_hi = options.z_hi;
  if (gmax > 0.0) {
    const double bound = kExpOverflow / gmax;
    z_lo = std::max(z_lo, -bound);
    z_hi = std::min(z_hi, bound);
  }
  if (!(z_lo < z_hi))
    throw Error("statistics", "z search interval collapsed under the "
                              "exp-overflow guard; rescale the observable");
  const double twist_z_max = std::max(std::abs(z_lo), std::abs(z_hi));

  RateFunctionResult res;
  res.s_grid = s_grid;
  res.z_lo = z_lo;
  res.z_hi = z_hi;
  res.cold_start = options.cold_start;
  const std::size_t m = s_grid.size();
  res.r.resize(m);
  res.z_star.resize(m);
  res.iterations.resize(m);
  res.saturated.resize(m);
  res.failed.resize(m);

  const auto store = [&](std::size_t i, const RatePoint& pt) {
    res.r[i] = pt.r;
    res.z_star[i] = pt.z_star;
    res.iterations[i] = pt.evals;
    res.saturated[i] = pt.saturated;
    res.failed[i] = pt.failed;
  };

  if (options.cold_start) {
    // Workers fill disjoint slots of a plain vector; the bit-packed flag
    // vectors in the result are only written sequentially afterwards.
    std::vector<RatePoint> pts(m);
    parallel_for(static_cast<std::int64_t>(m), threads,
                 [&](std::int64_t begin, std::int64_t end) {
                   for (std::int64_t i = begin; i < end; ++i) {
                     const auto k = static_cast<std::size_t>(i);
                     pts[k] = solve_rate_point(p, dg, s_grid[k], 0.0, nullptr,
                                               options, z_lo, z_hi,
                                               twist_z_max, 1);
                   }
                 });
    for (std::size_t i = 0; i < m; ++i) store(i, pts[i]);
  } else {
    SpectralData warm = base_sd;
    double z_init = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      RatePoint pt = solve_rate_point(p, dg, s_grid[i], z_init, &warm, options,
                                      z_lo, z_hi, twist_z_max, threads);
      store(i, pt);
      warm = std::move(pt.final_sd);
      z_init = res.z_star[i];
    }
  }
  return res;
}

RateFunctionResult rate_function(const std::vector<double>& s_grid,
                                 const TransferMatrix& p, const Observable& g,
                                 double opt_tol) {
  RateOptions options;
  options.opt_tol = opt_tol;
  // The optimizer cannot resolve |f'| below the eigenvalue noise floor, so
  // a tight optimality tolerance pulls the eigensolve down with it.
  options.eig_tol =
      std::clamp(opt_tol * 1e-2, kListingEigTol, kDefaultEigTol);
  return rate_function(s_grid, p, g, options);
}

EscapeReport escape_rate(const TransferMatrix& p,
                         std::vector<std::int64_t> region, double eig_tol,
                         int threads) {
  std::sort(region.begin(), region.end());
  region.erase(std::unique(region.begin(), region.end()), region.end());
  if (region.empty())
    throw Error("statistics", "escape region is empty");
  if (region.front() < 0 || region.back() >= p.n())
    throw Error("statistics", "escape region indices outside 0.." +
                                  std::to_string(p.n() - 1));

  EscapeReport rep;
  rep.region = std::move(region);
  const SparseCsr sub = p.csr().submatrix(rep.region);
  if (sub.nnz() == 0) {
    rep.lambda_sub = 0.0;
    rep.escape_rate = std::numeric_limits<double>::infinity();
    return rep;
  }
  std::vector<double> v0(rep.region.size(), 1.0);
  PowerResult pr;
  try {
    pr = power_method(sub, std::move(v0), Side::kRight, eig_tol,
                      kDefaultEigMaxIter, threads);
  } catch (const Error& e) {
    // A region whose mass drains to exactly zero in finitely many steps
    // (nilpotent submatrix) kills the sum normalizer; that is an infinite
    // escape rate, not a solver failure.
    if (std::string(e.what()).find("normalizer") != std::string::npos) {
      rep.lambda_sub = 0.0;
      rep.escape_rate = std::numeric_limits<double>::infinity();
      return rep;
    }
    throw;
  }
  rep.lambda_sub = pr.lambda;
  if (rep.lambda_sub <= 1e-300) {
    rep.escape_rate = std::numeric_limits<double>::infinity();
    return rep;
  }
  if (!(rep.lambda_sub <= 1.0 + 1e-10))
    throw Error("statistics",
                "submatrix eigenvalue " + std::to_string(rep.lambda_sub) +
                    " exceeds 1; the matrix is not sub-stochastic");
  rep.escape_rate = -std::log(rep.lambda_sub);
  // lambda_sub may exceed 1 by pure roundoff (e.g. the full region); report
  // the nonnegative rate in that case.
  if (rep.escape_rate < 0.0 && rep.escape_rate > -1e-9) rep.escape_rate = 0.0;
  return rep;
}

std::vector<std::int64_t> cells_in_interval(std::int64_t n, double a,
                                            double b) {
  if (n < 1) throw Error("statistics", "partition needs at least one cell");
  if (!(a >= -1e-12 && b <= 1.0 + 1e-12 && a < b))
    throw Error("statistics", "interval [" + std::to_string(a) + ", " +
                                  std::to_string(b) +
                                  "] is not inside the unit interval");
  const double dn = static_cast<double>(n);
  auto i0 = static_cast<std::int64_t>(std::ceil(a * dn - 1e-9));
  auto i1 = static_cast<std::int64_t>(std::floor(b * dn + 1e-9)) - 1;
  i0 = std::max<std::int64_t>(i0, 0);
  i1 = std::min<std::int64_t>(i1, n - 1);
  if (i1 < i0)
    throw Error("statistics", "no cell of the n = " + std::to_string(n) +
                                  " partition fits inside [" +
                                  std::to_string(a) + ", " + std::to_string(b) +
                                  "]");
  std::vector<std::int64_t> cells(static_cast<std::size_t>(i1 - i0 + 1));
  std::iota(cells.begin(), cells.end(), i0);
  return cells;
}

double consistency_check_rate_vs_escape(const TransferMatrix& p,
                                        std::int64_t n) {
  if (n != p.n())
    throw Error("statistics", "stated resolution " + std::to_string(n) +
                                  " does not match the matrix (" +
                                  std::to_string(p.n()) + ")");
  const RateFunctionResult rr =
      rate_function({1.0 - 1e-15}, p, Observable::indicator_half(), 1e-13);
  const EscapeReport er =
      escape_rate(p, cells_in_interval(n, 0.0, 0.5), 1e-13);
  return std::abs(rr.r[0] - er.escape_rate);
}

}  // namespace transferlab
