#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace transferlab {

/// Default power-iteration stopping tolerance (the documented experiment
/// setting). The stricter 1e-15 used by the reference iteration loop is
/// available as kListingEigTol.
inline constexpr double kDefaultEigTol = 5e-12;
inline constexpr double kListingEigTol = 1e-15;
inline constexpr std::int64_t kDefaultEigMaxIter = 200000;

/// One sparse entry during assembly.
struct Triplet {
  std::int64_t row = 0;
  std::int64_t col = 0;
  double value = 0.0;
};

/// Square sparse matrix in compressed-sparse-row form, with the transpose
/// structure cached so density-side products y = M^T x gather per output row
/// (fixed summation order, hence bit-identical for any thread count).
/// Immutable after construction.
class SparseCsr {
 public:
  SparseCsr() = default;

  /// Builds an n-by-n matrix. Duplicate (row, col) pairs are accumulated by
  /// summation; exact zeros are dropped; columns are sorted within each row.
  static SparseCsr from_triplets(std::int64_t n, std::vector<Triplet> entries);

  std::int64_t n() const { return n_; }
  std::int64_t nnz() const { return static_cast<std::int64_t>(val_.size()); }

  const std::vector<std::int64_t>& row_ptr() const { return row_ptr_; }
  const std::vector<std::int64_t>& cols() const { return col_; }
  const std::vector<double>& values() const { return val_; }

  /// Value at (i, j), zero if not stored.
  double entry(std::int64_t i, std::int64_t j) const;

  std::vector<double> row_sums() const;
  std::int64_t max_row_nnz() const;

  /// y = M x (functional side).
  void apply(const std::vector<double>& x, std::vector<double>& y,
             int threads = 1) const;

  /// y = M^T x (density side).
  void apply_transpose(const std::vector<double>& x, std::vector<double>& y,
                       int threads = 1) const;

  /// Sub-matrix on keep x keep (indices must be sorted and unique). Values
  /// are copied as-is: rows of a stochastic matrix become sub-stochastic.
  SparseCsr submatrix(const std::vector<std::int64_t>& keep) const;

  /// New matrix with row i multiplied by factor[i].
  SparseCsr scale_rows(const std::vector<double>& factor) const;

  /// this * rhs (row-major sparse product, deterministic column order).
  SparseCsr multiply(const SparseCsr& rhs, int threads = 1) const;

 private:
  void build_transpose();

  std::int64_t n_ = 0;
  std::vector<std::int64_t> row_ptr_, col_;
  std::vector<double> val_;
  std::vector<std::int64_t> t_row_ptr_, t_col_;
  std::vector<double> t_val_;
};

/// Compensated (Neumaier) summation; used for all O(n) reductions whose
/// 1e-12-level accuracy invariants would otherwise be eaten by naive
/// accumulation at n = 25000.
double neumaier_sum(const std::vector<double>& x);
double neumaier_dot(const std::vector<double>& a, const std::vector<double>& b);
double neumaier_dot3(const std::vector<double>& a, const std::vector<double>& b,
                     const std::vector<double>& c);

/// Equipartition descriptor: dim 1 is n cells of width 1/n on [0,1]; dim 2 is
/// an n-by-n grid of cubes of side 1/n (regularity constant kappa = sqrt(d);
/// diameter sqrt(d)/n over inscribed-ball diameter 1/n).
struct PartitionDescriptor {
  int dim = 1;
  std::int64_t cells_per_axis = 0;

  std::int64_t total_cells() const {
    return dim == 1 ? cells_per_axis : cells_per_axis * cells_per_axis;
  }
  double cell_measure() const;
  double kappa() const;
  /// Midpoint of 1-D cell i = [i/n, (i+1)/n).
  double midpoint(std::int64_t i) const {
    return (static_cast<double>(i) + 0.5) / static_cast<double>(cells_per_axis);
  }
};

/// Row-stochastic transfer matrix over an equipartition. Construction
/// validates nonnegativity and that every row sums to 1 within 1e-12; it does
/// NOT rescale (builders normalize exactly once, so an exported matrix
/// re-imported bit-exactly stays bit-exact).
class TransferMatrix {
 public:
  TransferMatrix(SparseCsr csr, PartitionDescriptor partition,
                 std::string map_name);

  const SparseCsr& csr() const { return csr_; }
  std::int64_t n() const { return csr_.n(); }
  const PartitionDescriptor& partition() const { return partition_; }
  const std::string& map_name() const { return map_name_; }

 private:
  SparseCsr csr_;
  PartitionDescriptor partition_;
  std::string map_name_;
};

/// Divides each row by its sum. Rejects rows whose sum deviates from 1 by
/// more than max_defect (re-normalization must never change a row by more
/// than that, relatively). Builders call this exactly once.
void normalize_rows(SparseCsr& m, double max_defect = 1e-12);

enum class Side { kLeft, kRight };

/// Result of one power iteration run. vec is sum-normalized to sum(vec) = n
/// (the density convention sum(v)/n = 1); residual is the final eigenvalue
/// increment |lambda_{k+1} - lambda_k|.
struct PowerResult {
  double lambda = 0.0;
  std::vector<double> vec;
  std::int64_t iterations = 0;
  double residual = 0.0;
};

/// Leading eigen-pair by power iteration with the vector-sum normalizer:
/// iterates w <- M^T w (right/density side) or w <- M w (left side), the sum
/// of the new iterate being the eigenvalue estimate. Stops when the
/// eigenvalue increment |lambda_{k+1} - lambda_k| <= tol AND the iterate
/// movement ||w_{k+1} - w_k||_1 <= tol (for Markov matrices the sum estimate
/// is identically 1, so the eigenvalue increment alone cannot certify that
/// the density converged). Throws on max_iter or a zero/sign-indefinite
/// normalizer.
PowerResult power_method(const SparseCsr& m, std::vector<double> v0, Side side,
                         double tol = kDefaultEigTol,
                         std::int64_t max_iter = kDefaultEigMaxIter,
                         int threads = 1);

/// Leading eigen-pair of a transfer operator discretization at one parameter
/// value. Normalization: sum(right)/n = 1 and left^T right / n = 1.
struct SpectralData {
  double lambda = 0.0;
  double log_lambda = 0.0;
  std::vector<double> right;  // density-side eigenvector v
  std::vector<double> left;   // functional-side eigenvector phi
  std::int64_t iterations = 0;
  double residual = 0.0;
};

/// Solution of the bordered system [M^T - I, -v; 1^T, 0] (dv, dlam) =
/// (rhs, 0). dv sums to zero as imposed by the last row.
struct BorderedSolution {
  std::vector<double> dv;
  double dlam = 0.0;
  double residual_inf = 0.0;
};

/// Sparse-LU solve of the (n+1)-bordered system above, with one step of
/// iterative refinement if the residual exceeds 1e-10 relative to rhs.
/// Throws if the system is singular (lambda = 1 not simple at this
/// resolution — check the spectral gap).
BorderedSolution solve_bordered(const TransferMatrix& m,
                                const std::vector<double>& v,
                                const std::vector<double>& rhs);

namespace detail {

/// Solves the general bordered system [A, b; c^T, 0] (w, t) = (rhs, 0) with A
/// given as triplets. Shared by solve_bordered and the reduced-resolvent
/// solve of the second-derivative formula.
struct GeneralBorderedSolution {
  std::vector<double> w;
  double t = 0.0;
  double residual_inf = 0.0;
};

/// Optional structure hint: A = sign * (lambda_s I - S^T), border_col =
/// col_scale * v, border_row = phi, with phi^T v = n (the paired left/right
/// leading eigenvectors of S). When the operator is dense enough that a
/// direct factorization would dominate the runtime, the solve switches to a
/// deflated fixed-point iteration that only needs S^T products and converges
/// at the spectral-gap rate; the direct path remains the fallback.
struct BorderedIterativeHint {
  const SparseCsr* s = nullptr;
  double lambda_s = 1.0;
  double sign = 1.0;
  double col_scale = 1.0;
  const std::vector<double>* v = nullptr;
  const std::vector<double>* phi = nullptr;
  int threads = 1;
};

GeneralBorderedSolution solve_bordered_general(
    std::int64_t n, const std::vector<Triplet>& a_entries,
    const std::vector<double>& border_col, const std::vector<double>& border_row,
    const std::vector<double>& rhs, const std::string& context,
    const BorderedIterativeHint* hint = nullptr);

}  // namespace detail

/// Estimates |lambda_2| by power iteration on the complement of the leading
/// eigenspace: each iterate is re-projected by Id - Pi (Pi the rank-one
/// leading projection) and the stabilized L2 growth ratio is returned.
/// A deterministic seeded start vector is used. Throws on non-convergence.
double spectral_gap_probe(const TransferMatrix& m, double tol = 1e-8,
                          std::int64_t max_iter = kDefaultEigMaxIter,
                          int threads = 1);

}  // namespace transferlab
