#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "transferlab/maps.hpp"
#include "transferlab/sparse.hpp"
#include "transferlab/statistics.hpp"

namespace transferlab {

/// Stochastic smoothing kernel on the interval. eps is the HALF-width: the
/// kernel is supported on [-eps, +eps] around each point, so the uniform
/// kernel with eps = 1.5/n spreads a cell midpoint over exactly 3 cells.
struct KernelSpec {
  enum class Shape { kUniform, kTriangular };
  enum class Boundary { kReflect, kRenormalize };

  Shape shape = Shape::kUniform;
  double eps = 0.0;
  /// reflect folds escaping mass back at 0 and 1 (keeps the kernel matrix
  /// bistochastic); renormalize truncates to [0,1] and rescales each row.
  Boundary boundary = Boundary::kReflect;
};

/// Post-multiplies P by the discretized kernel matrix (banded, row-stochastic)
/// so the result is again a row-stochastic transfer matrix on the same
/// partition. 1-D partitions only. Warns on stderr when eps is below the cell
/// width (the kernel then barely moves mass); throws when eps <= 0 or eps > 1.
TransferMatrix apply_kernel(const TransferMatrix& p, const KernelSpec& k,
                            int threads = 1);

/// The discretized kernel matrix itself (row l of cell-to-cell smoothing
/// masses); exposed for inspection and tests.
SparseCsr kernel_matrix(std::int64_t n, const KernelSpec& k);

enum class StudyMode { kRefineN, kKernelEps };

/// Metrics measured at one grid point of a convergence study.
struct StudyPoint {
  double parameter = 0.0;  ///< the small parameter: 1/n or eps (0 = baseline)
  std::int64_t n = 0;      ///< resolution used at this point
  double eps = 0.0;        ///< kernel half-width (0 = unperturbed)
  std::map<double, double> lambda_at_z;  ///< z -> leading eigenvalue
  double sigma2 = 0.0;
  std::map<double, double> rate_values;  ///< s -> r(s)
  bool has_error = false;
  std::string error;  ///< set when this point failed; metrics then absent
};

/// Convergence measurements toward the fine-resolution / zero-noise limit.
struct ConvergenceStudy {
  StudyMode mode = StudyMode::kRefineN;
  std::string map;
  std::string observable;
  /// The user grid, stored as the small parameter (1/n for refine_n, eps for
  /// kernel_eps), in the order given.
  std::vector<double> parameter_grid;
  std::vector<double> z_probe;
  std::vector<double> s_probe;
  /// One record per grid point; kernel_eps studies carry one extra trailing
  /// point: the eps = 0 baseline used as reference.
  std::vector<StudyPoint> points;
  std::size_t reference_index = 0;  ///< finest point (largest n, or eps = 0)
  /// Least-squares slope of log|sigma2 - sigma2_ref| vs log(parameter) over
  /// the non-reference points; descriptive only (no asserted value).
  double fitted_exponent = 0.0;
  double fit_residual = 0.0;      ///< RMS residual of that fit
  std::int64_t fit_points = 0;    ///< deviations that entered the fit
};

struct StudyOptions {
  std::int64_t fixed_n = 5000;  ///< resolution held fixed in kernel_eps mode
  KernelSpec kernel;            ///< shape/boundary for kernel_eps (eps from grid)
  double eig_tol = kDefaultEigTol;
  double opt_tol = kDefaultOptTol;
  std::int64_t samples_per_cell = 0;  ///< unused for 1-D exact construction
  int threads = 1;
};

/// Runs the full measurement pipeline at every grid point: leading eigenvalue
/// at each z in z_probe, the variance, and the rate function on s_probe
/// (either probe may be empty to skip it). refine_n grids list resolutions n
/// ascending; kernel_eps grids list eps values descending toward 0 at
/// options.fixed_n. A failing point is recorded with its error message and
/// the study is still returned.
ConvergenceStudy run_convergence_study(const PiecewiseAffineMap1D& map,
                                       const Observable& observable,
                                       StudyMode mode,
                                       const std::vector<double>& grid,
                                       const std::vector<double>& z_probe,
                                       const std::vector<double>& s_probe,
                                       const StudyOptions& options = {});

/// Sup-norm distance of each point's rate curve from the reference point's,
/// in study-point order (the reference's own entry is 0). Throws when the
/// points do not share one s grid (e.g. a point failed).
std::vector<double> rate_uniform_deviation(const ConvergenceStudy& study);

/// |sigma2 - sigma2_ref| per point, in study-point order. Throws when a
/// point carries an error.
std::vector<double> sigma2_deviation(const ConvergenceStudy& study);

}  // namespace transferlab
