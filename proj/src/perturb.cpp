#include "transferlab/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "transferlab/errors.hpp"
#include "transferlab/parallel.hpp"
#include "transferlab/twist.hpp"
#include "transferlab/ulam.hpp"

namespace transferlab {

namespace {

void validate_kernel(const KernelSpec& k) {
  if (!(k.eps > 0.0))
    throw Error("perturb", "kernel width eps must be positive");
  if (!(k.eps <= 1.0))
    throw Error("perturb",
                "kernel half-width eps = " + std::to_string(k.eps) +
                    " exceeds the unit interval; one boundary fold no longer "
                    "suffices");
}

// Kernel CDF at offset t from the center (saturating outside [-eps, eps]).
double kernel_cdf(const KernelSpec& k, double t) {
  const double e = k.eps;
  if (t <= -e) return 0.0;
  if (t >= e) return 1.0;
  if (k.shape == KernelSpec::Shape::kUniform) return (t + e) / (2.0 * e);
  // Triangular: density (1 - |t|/e)/e, piecewise-quadratic CDF.
  if (t <= 0.0) {
    const double u = t + e;
    return u * u / (2.0 * e * e);
  }
  const double u = e - t;
  return 1.0 - u * u / (2.0 * e * e);
}

}  // namespace

SparseCsr kernel_matrix(std::int64_t n, const KernelSpec& k) {
  validate_kernel(k);
  if (n < 1) throw Error("perturb", "kernel matrix needs at least one cell");
  const double h = 1.0 / static_cast<double>(n);
  const bool reflect = k.boundary == KernelSpec::Boundary::kReflect;

  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(
      n * (static_cast<std::int64_t>(2.0 * k.eps * n) + 3)));
  for (std::int64_t j = 0; j < n; ++j) {
    const double x = (static_cast<double>(j) + 0.5) * h;
    const auto lmin =
        static_cast<std::int64_t>(std::floor((x - k.eps) * n)) - 1;
    const auto lmax =
        static_cast<std::int64_t>(std::floor((x + k.eps) * n)) + 1;
    for (std::int64_t l = lmin; l <= lmax; ++l) {
      const double mass = kernel_cdf(k, (static_cast<double>(l) + 1.0) * h - x) -
                          kernel_cdf(k, static_cast<double>(l) * h - x);
      if (!(mass > 0.0)) continue;
      std::int64_t target = l;
      if (l < 0) {
        if (!reflect) continue;  // renormalize: drop and rescale below
        target = -l - 1;
      } else if (l >= n) {
        if (!reflect) continue;
        target = 2 * n - 1 - l;
      }
      entries.push_back({j, target, mass});
    }
  }
  SparseCsr km = SparseCsr::from_triplets(n, std::move(entries));
  // Exactly-once row normalization: reflect rows already sum to 1 up to
  // CDF-telescoping roundoff; renormalize rows carry the truncated mass.
  normalize_rows(km, reflect ? 1e-12 : 1.0);
  return km;
}

TransferMatrix apply_kernel(const TransferMatrix& p, const KernelSpec& k,
                            int threads) {
  if (p.partition().dim != 1)
    throw Error("perturb",
                "kernel perturbation is implemented for interval partitions "
                "only");
  validate_kernel(k);
  const double cell_width = 1.0 / static_cast<double>(p.n());
  if (k.eps < cell_width)
    std::cerr << "[transferlab] warning: kernel half-width " << k.eps
              << " is below the cell width " << cell_width
              << "; the smoothing barely moves mass at this resolution\n";
  const SparseCsr km = kernel_matrix(p.n(), k);
  return TransferMatrix(p.csr().multiply(km, threads), p.partition(),
                        p.map_name());
}

namespace {

void fit_sigma2_exponent(ConvergenceStudy& st) {
  std::vector<double> xs, ys;
  const StudyPoint& ref = st.points[st.reference_index];
  for (std::size_t i = 0; i < st.points.size(); ++i) {
    if (i == st.reference_index) continue;
    const StudyPoint& pt = st.points[i];
    if (pt.has_error || ref.has_error) continue;
    const double dev = std::abs(pt.sigma2 - ref.sigma2);
    if (!(dev > 0.0) || !(pt.parameter > 0.0)) continue;
    xs.push_back(std::log(pt.parameter));
    ys.push_back(std::log(dev));
  }
  st.fit_points = static_cast<std::int64_t>(xs.size());
  if (xs.size() < 2) {
    st.fitted_exponent = std::numeric_limits<double>::quiet_NaN();
    st.fit_residual = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  const double m = static_cast<double>(xs.size());
  double xbar = 0.0, ybar = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xbar += xs[i];
    ybar += ys[i];
  }
  xbar /= m;
  ybar /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - xbar) * (xs[i] - xbar);
    sxy += (xs[i] - xbar) * (ys[i] - ybar);
  }
  st.fitted_exponent = sxy / sxx;
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double pred = ybar + st.fitted_exponent * (xs[i] - xbar);
    rss += (ys[i] - pred) * (ys[i] - pred);
  }
  st.fit_residual = std::sqrt(rss / m);
}

void measure_point(const TransferMatrix& p, const Observable& obs,
                   const std::vector<double>& z_probe,
                   const std::vector<double>& s_probe,
                   const StudyOptions& options, int threads, StudyPoint& pt) {
  if (!z_probe.empty()) {
    const SpectralData sd = leading_eigendata(p, nullptr, options.eig_tol,
                                              kDefaultEigMaxIter, threads);
    const DiscretizedObservable dg =
        center_against(discretize_observable(obs, p.n()), sd.right);
    const TwistSpectralCurve curve = twist_curve(
        p, dg, z_probe, options.eig_tol, kDefaultZMax, false, threads);
    for (std::size_t i = 0; i < z_probe.size(); ++i)
      pt.lambda_at_z[z_probe[i]] = curve.lambda[i];
  }
  pt.sigma2 = variance(p, obs, options.eig_tol, threads).sigma2;
  if (!s_probe.empty()) {
    RateOptions ro;
    ro.opt_tol = options.opt_tol;
    ro.eig_tol = options.eig_tol;
    ro.threads = threads;
    const RateFunctionResult rr = rate_function(s_probe, p, obs, ro);
    for (std::size_t i = 0; i < s_probe.size(); ++i)
      pt.rate_values[s_probe[i]] = rr.r[i];
  }
}

}  // namespace

ConvergenceStudy run_convergence_study(const PiecewiseAffineMap1D& map,
                                       const Observable& observable,
                                       StudyMode mode,
                                       const std::vector<double>& grid,
                                       const std::vector<double>& z_probe,
                                       const std::vector<double>& s_probe,
                                       const StudyOptions& options) {
  if (grid.size() < 3)
    throw Error("perturb", "a convergence study needs at least 3 grid points");
  for (std::size_t i = 1; i < s_probe.size(); ++i)
    if (!(s_probe[i] >= s_probe[i - 1]))
      throw Error("perturb", "s_probe must be sorted ascending");
  const int threads = resolve_threads(options.threads);

  ConvergenceStudy st;
  st.mode = mode;
  st.map = map.name();
  st.observable = observable.name();
  st.parameter_grid.reserve(grid.size());
  st.z_probe = z_probe;
  st.s_probe = s_probe;

  if (mode == StudyMode::kRefineN) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double v = grid[i];
      const double rounded = std::round(v);
      if (!(std::abs(v - rounded) <= 1e-9) || rounded < 2.0)
        throw Error("perturb", "refine_n grid values must be resolutions >= 2");
      if (i > 0 && !(v > grid[i - 1]))
        throw Error("perturb",
                    "refine_n grid must ascend toward the fine-grid limit");
      StudyPoint pt;
      pt.n = static_cast<std::int64_t>(rounded);
      pt.eps = 0.0;
      pt.parameter = 1.0 / rounded;
      st.parameter_grid.push_back(pt.parameter);
      st.points.push_back(std::move(pt));
    }
    st.reference_index = st.points.size() - 1;
    for (StudyPoint& pt : st.points) {
      try {
        const TransferMatrix p = build_ulam_1d(map, pt.n, threads);
        measure_point(p, observable, z_probe, s_probe, options, threads, pt);
      } catch (const Error& e) {
        pt.has_error = true;
        pt.error = e.what();
      }
    }
  } else {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double eps = grid[i];
      if (!(eps > 0.0))
        throw Error("perturb", "kernel_eps grid values must be positive");
      if (i > 0 && !(eps < grid[i - 1]))
        throw Error("perturb",
                    "kernel_eps grid must descend toward the zero-noise limit");
      StudyPoint pt;
      pt.n = options.fixed_n;
      pt.eps = eps;
      pt.parameter = eps;
      st.parameter_grid.push_back(eps);
      st.points.push_back(std::move(pt));
    }
    // The eps = 0 baseline is computable exactly (the unperturbed matrix) and
    // serves as the study's reference point, appended after the user grid.
    StudyPoint base;
    base.n = options.fixed_n;
    base.eps = 0.0;
    base.parameter = 0.0;
    st.points.push_back(std::move(base));
    st.reference_index = st.points.size() - 1;

    const TransferMatrix p0 = build_ulam_1d(map, options.fixed_n, threads);
    for (StudyPoint& pt : st.points) {
      try {
        if (pt.eps > 0.0) {
          KernelSpec k = options.kernel;
          k.eps = pt.eps;
          const TransferMatrix p = apply_kernel(p0, k, threads);
          measure_point(p, observable, z_probe, s_probe, options, threads, pt);
        } else {
          measure_point(p0, observable, z_probe, s_probe, options, threads,
                        pt);
        }
      } catch (const Error& e) {
        pt.has_error = true;
        pt.error = e.what();
      }
    }
  }

  fit_sigma2_exponent(st);
  return st;
}

std::vector<double> rate_uniform_deviation(const ConvergenceStudy& study) {
  if (study.points.empty() || study.reference_index >= study.points.size())
    throw Error("perturb", "study has no usable reference point");
  const StudyPoint& ref = study.points[study.reference_index];
  if (ref.has_error)
    throw Error("perturb",
                "study reference point failed: " + ref.error);
  std::vector<double> devs;
  devs.reserve(study.points.size());
  for (const StudyPoint& pt : study.points) {
    if (pt.has_error)
      throw Error("perturb", "study point failed: " + pt.error);
    if (pt.rate_values.size() != ref.rate_values.size())
      throw Error("perturb", "mismatched s grids across study points");
    double dev = 0.0;
    auto it_ref = ref.rate_values.begin();
    for (auto it = pt.rate_values.begin(); it != pt.rate_values.end();
         ++it, ++it_ref) {
      if (it->first != it_ref->first)
        throw Error("perturb", "mismatched s grids across study points");
      dev = std::max(dev, std::abs(it->second - it_ref->second));
    }
    devs.push_back(dev);
  }
  return devs;
}

std::vector<double> sigma2_deviation(const ConvergenceStudy& study) {
  if (study.points.empty() || study.reference_index >= study.points.size())
    throw Error("perturb", "study has no usable reference point");
  const StudyPoint& ref = study.points[study.reference_index];
  if (ref.has_error)
    throw Error("perturb", "study reference point failed: " + ref.error);
  std::vector<double> devs;
  devs.reserve(study.points.size());
  for (const StudyPoint& pt : study.points) {
    if (pt.has_error)
      throw Error("perturb", "study point failed: " + pt.error);
    devs.push_back(std::abs(pt.sigma2 - ref.sigma2));
  }
  return devs;
}

}  // namespace transferlab
