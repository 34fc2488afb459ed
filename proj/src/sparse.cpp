#include "transferlab/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "transferlab/errors.hpp"
#include "transferlab/parallel.hpp"

namespace transferlab {

namespace {

constexpr double kRowSumTol = 1e-12;

}  // namespace

SparseCsr SparseCsr::from_triplets(std::int64_t n, std::vector<Triplet> entries) {
  if (n <= 0) throw Error("sparse-core", "matrix dimension must be positive");
  for (const Triplet& t : entries) {
    if (t.row < 0 || t.row >= n || t.col < 0 || t.col >= n)
      throw Error("sparse-core", "triplet index (" + std::to_string(t.row) +
                                     ", " + std::to_string(t.col) +
                                     ") outside " + std::to_string(n) +
                                     "-cell matrix");
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Triplet& a, const Triplet& b) {
                     return a.row != b.row ? a.row < b.row : a.col < b.col;
                   });
  SparseCsr m;
  m.n_ = n;
  m.row_ptr_.assign(static_cast<std::size_t>(n) + 1, 0);
  m.col_.reserve(entries.size());
  m.val_.reserve(entries.size());
  std::size_t k = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    while (k < entries.size() && entries[k].row == i) {
      double acc = entries[k].value;
      const std::int64_t j = entries[k].col;
      ++k;
      while (k < entries.size() && entries[k].row == i && entries[k].col == j) {
        acc += entries[k].value;  // duplicate hits accumulate
        ++k;
      }
      if (acc != 0.0) {
        m.col_.push_back(j);
        m.val_.push_back(acc);
      }
    }
    m.row_ptr_[static_cast<std::size_t>(i) + 1] =
        static_cast<std::int64_t>(m.col_.size());
  }
  m.build_transpose();
  return m;
}

void SparseCsr::build_transpose() {
  t_row_ptr_.assign(static_cast<std::size_t>(n_) + 1, 0);
  t_col_.assign(val_.size(), 0);
  t_val_.assign(val_.size(), 0.0);
  // counting pass over columns
  for (std::int64_t j : col_) ++t_row_ptr_[static_cast<std::size_t>(j) + 1];
  for (std::int64_t j = 0; j < n_; ++j)
    t_row_ptr_[static_cast<std::size_t>(j) + 1] +=
        t_row_ptr_[static_cast<std::size_t>(j)];
  std::vector<std::int64_t> cursor(t_row_ptr_.begin(), t_row_ptr_.end() - 1);
  for (std::int64_t i = 0; i < n_; ++i) {
    for (std::int64_t k = row_ptr_[static_cast<std::size_t>(i)];
         k < row_ptr_[static_cast<std::size_t>(i) + 1]; ++k) {
      const std::int64_t j = col_[static_cast<std::size_t>(k)];
      const std::int64_t slot = cursor[static_cast<std::size_t>(j)]++;
      t_col_[static_cast<std::size_t>(slot)] = i;
      t_val_[static_cast<std::size_t>(slot)] = val_[static_cast<std::size_t>(k)];
    }
  }
}

double SparseCsr::entry(std::int64_t i, std::int64_t j) const {
  if (i < 0 || i >= n_ || j < 0 || j >= n_)
    throw Error("sparse-core", "entry index out of range");
  const auto begin = col_.begin() + row_ptr_[static_cast<std::size_t>(i)];
  const auto end = col_.begin() + row_ptr_[static_cast<std::size_t>(i) + 1];
  const auto it = std::lower_bound(begin, end, j);
  if (it == end || *it != j) return 0.0;
  return val_[static_cast<std::size_t>(it - col_.begin())];
}

std::vector<double> SparseCsr::row_sums() const {
  std::vector<double> s(static_cast<std::size_t>(n_), 0.0);
  for (std::int64_t i = 0; i < n_; ++i) {
    double acc = 0.0;
    for (std::int64_t k = row_ptr_[static_cast<std::size_t>(i)];
         k < row_ptr_[static_cast<std::size_t>(i) + 1]; ++k)
      acc += val_[static_cast<std::size_t>(k)];
    s[static_cast<std::size_t>(i)] = acc;
  }
  return s;
}

std::int64_t SparseCsr::max_row_nnz() const {
  std::int64_t best = 0;
  for (std::int64_t i = 0; i < n_; ++i)
    best = std::max(best, row_ptr_[static_cast<std::size_t>(i) + 1] -
                              row_ptr_[static_cast<std::size_t>(i)]);
  return best;
}

void SparseCsr::apply(const std::vector<double>& x, std::vector<double>& y,
                      int threads) const {
  if (static_cast<std::int64_t>(x.size()) != n_)
    throw Error("sparse-core", "apply: vector length mismatch");
  y.assign(static_cast<std::size_t>(n_), 0.0);
  parallel_for(n_, threads, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      double acc = 0.0;
      for (std::int64_t k = row_ptr_[static_cast<std::size_t>(i)];
           k < row_ptr_[static_cast<std::size_t>(i) + 1]; ++k)
        acc += val_[static_cast<std::size_t>(k)] *
               x[static_cast<std::size_t>(col_[static_cast<std::size_t>(k)])];
      y[static_cast<std::size_t>(i)] = acc;
    }
  });
}

void SparseCsr::apply_transpose(const std::vector<double>& x,
                                std::vector<double>& y, int threads) const {
  if (static_cast<std::int64_t>(x.size()) != n_)
    throw Error("sparse-core", "apply_transpose: vector length mismatch");
  y.assign(static_cast<std::size_t>(n_), 0.0);
  parallel_for(n_, threads, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t j = begin; j < end; ++j) {
      double acc = 0.0;
      for (std::int64_t k = t_row_ptr_[static_cast<std::size_t>(j)];
           k < t_row_ptr_[static_cast<std::size_t>(j) + 1]; ++k)
        acc += t_val_[static_cast<std::size_t>(k)] *
               x[static_cast<std::size_t>(t_col_[static_cast<std::size_t>(k)])];
      y[static_cast<std::size_t>(j)] = acc;
    }
  });
}

SparseCsr SparseCsr::submatrix(const std::vector<std::int64_t>& keep) const {
  if (keep.empty()) throw Error("sparse-core", "submatrix: empty index set");
  std::vector<std::int64_t> pos(static_cast<std::size_t>(n_), -1);
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const std::int64_t c = keep[r];
    if (c < 0 || c >= n_)
      throw Error("sparse-core", "submatrix: index out of range");
    if (pos[static_cast<std::size_t>(c)] != -1)
      throw Error("sparse-core", "submatrix: duplicate index");
    if (r > 0 && keep[r] <= keep[r - 1])
      throw Error("sparse-core", "submatrix: indices must be sorted ascending");
    pos[static_cast<std::size_t>(c)] = static_cast<std::int64_t>(r);
  }
  std::vector<Triplet> kept;
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const std::int64_t i = keep[r];
    for (std::int64_t k = row_ptr_[static_cast<std::size_t>(i)];
         k < row_ptr_[static_cast<std::size_t>(i) + 1]; ++k) {
      const std::int64_t pj = pos[static_cast<std::size_t>(
          col_[static_cast<std::size_t>(k)])];
      if (pj >= 0)
        kept.push_back({static_cast<std::int64_t>(r), pj,
                        val_[static_cast<std::size_t>(k)]});
    }
  }
  return from_triplets(static_cast<std::int64_t>(keep.size()), std::move(kept));
}

SparseCsr SparseCsr::scale_rows(const std::vector<double>& factor) const {
  if (static_cast<std::int64_t>(factor.size()) != n_)
    throw Error("sparse-core", "scale_rows: factor length mismatch");
  SparseCsr m = *this;
  for (std::int64_t i = 0; i < n_; ++i) {
    const double f = factor[static_cast<std::size_t>(i)];
    for (std::int64_t k = row_ptr_[static_cast<std::size_t>(i)];
         k < row_ptr_[static_cast<std::size_t>(i) + 1]; ++k)
      m.val_[static_cast<std::size_t>(k)] *= f;
  }
  m.build_transpose();
  return m;
}

SparseCsr SparseCsr::multiply(const SparseCsr& rhs, int threads) const {
  if (rhs.n_ != n_) throw Error("sparse-core", "multiply: dimension mismatch");
  std::vector<std::vector<Triplet>> rows(static_cast<std::size_t>(n_));
  parallel_for(n_, threads, [&](std::int64_t begin, std::int64_t end) {
    std::vector<double> scratch(static_cast<std::size_t>(n_), 0.0);
    std::vector<std::int64_t> touched;
    for (std::int64_t i = begin; i < end; ++i) {
      touched.clear();
      for (std::int64_t k = row_ptr_[static_cast<std::size_t>(i)];
           k < row_ptr_[static_cast<std::size_t>(i) + 1]; ++k) {
        const std::int64_t j = col_[static_cast<std::size_t>(k)];
        const double a = val_[static_cast<std::size_t>(k)];
        for (std::int64_t r = rhs.row_ptr_[static_cast<std::size_t>(j)];
             r < rhs.row_ptr_[static_cast<std::size_t>(j) + 1]; ++r) {
          const std::int64_t c = rhs.col_[static_cast<std::size_t>(r)];
          if (scratch[static_cast<std::size_t>(c)] == 0.0) touched.push_back(c);
          scratch[static_cast<std::size_t>(c)] +=
              a * rhs.val_[static_cast<std::size_t>(r)];
        }
      }
      std::sort(touched.begin(), touched.end());
      auto& out = rows[static_cast<std::size_t>(i)];
      out.reserve(touched.size());
      for (std::int64_t c : touched) {
        const double v = scratch[static_cast<std::size_t>(c)];
        scratch[static_cast<std::size_t>(c)] = 0.0;
        if (v != 0.0) out.push_back({i, c, v});
      }
    }
  });
  std::vector<Triplet> flat;
  std::size_t total = 0;
  for (const auto& r : rows) total += r.size();
  flat.reserve(total);
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return from_triplets(n_, std::move(flat));
}

double neumaier_sum(const std::vector<double>& x) {
  double sum = 0.0, comp = 0.0;
  for (double v : x) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  return sum + comp;
}

namespace {

template <typename TermFn>
double neumaier_accumulate(std::size_t count, TermFn term) {
  double sum = 0.0, comp = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double v = term(i);
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  return sum + comp;
}

}  // namespace

double neumaier_dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw Error("sparse-core", "dot: length mismatch");
  return neumaier_accumulate(a.size(), [&](std::size_t i) { return a[i] * b[i]; });
}

double neumaier_dot3(const std::vector<double>& a, const std::vector<double>& b,
                     const std::vector<double>& c) {
  if (a.size() != b.size() || a.size() != c.size())
    throw Error("sparse-core", "dot3: length mismatch");
  return neumaier_accumulate(a.size(),
                             [&](std::size_t i) { return a[i] * b[i] * c[i]; });
}

double PartitionDescriptor::cell_measure() const {
  const double w = 1.0 / static_cast<double>(cells_per_axis);
  return dim == 1 ? w : w * w;
}

double PartitionDescriptor::kappa() const {
  return std::sqrt(static_cast<double>(dim));
}

TransferMatrix::TransferMatrix(SparseCsr csr, PartitionDescriptor partition,
                               std::string map_name)
    : csr_(std::move(csr)),
      partition_(partition),
      map_name_(std::move(map_name)) {
  if (partition_.dim != 1 && partition_.dim != 2)
    throw Error("sparse-core", "partition dimension must be 1 or 2");
  if (partition_.total_cells() != csr_.n())
    throw Error("sparse-core", "partition cell count does not match matrix");
  for (double v : csr_.values())
    if (!(v >= 0.0))
      throw Error("sparse-core", "transfer matrix entries must be nonnegative");
  for (double s : csr_.row_sums())
    if (std::abs(s - 1.0) > kRowSumTol)
      throw Error("sparse-core",
                  "transfer matrix row sum " + std::to_string(s) +
                      " deviates from 1 beyond 1e-12 (not Markov)");
}

void normalize_rows(SparseCsr& m, double max_defect) {
  const std::vector<double> sums = m.row_sums();
  std::vector<double> factor(sums.size(), 1.0);
  for (std::size_t i = 0; i < sums.size(); ++i) {
    if (!(sums[i] > 0.0))
      throw Error("sparse-core", "row " + std::to_string(i + 1) +
                                     " has nonpositive sum; cannot normalize");
    if (std::abs(sums[i] - 1.0) > max_defect)
      throw Error("sparse-core",
                  "row " + std::to_string(i + 1) + " sum " +
                      std::to_string(sums[i]) +
                      " deviates from 1 beyond the allowed defect");
    factor[i] = 1.0 / sums[i];
  }
  m = m.scale_rows(factor);
}

PowerResult power_method(const SparseCsr& m, std::vector<double> v0, Side side,
                         double tol, std::int64_t max_iter, int threads) {
  const std::int64_t n = m.n();
  if (static_cast<std::int64_t>(v0.size()) != n)
    throw Error("sparse-core", "power_method: start vector length mismatch");
  if (!(tol > 0.0)) throw Error("sparse-core", "power_method: tol must be > 0");
  const double s0 = neumaier_sum(v0);
  if (!(s0 > 0.0))
    throw Error("sparse-core",
                "power_method: start vector must have positive sum");
  std::vector<double> w(v0);
  for (double& x : w) x /= s0;

  std::vector<double> y(static_cast<std::size_t>(n), 0.0);
  double lam_prev = std::numeric_limits<double>::quiet_NaN();
  double lam = 0.0;
  double delta = std::numeric_limits<double>::infinity();
  std::int64_t iter = 0;
  bool converged = false;
  while (iter < max_iter) {
    if (side == Side::kRight)
      m.apply_transpose(w, y, threads);
    else
      m.apply(w, y, threads);
    ++iter;
    lam = neumaier_sum(y);
    if (!(lam > 0.0))
      throw Error("sparse-core",
                  "power_method: zero or sign-indefinite normalizer at "
                  "iteration " +
                      std::to_string(iter) +
                      " (matrix not positive as required for this solver)");
    double move = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double wi = y[i] / lam;
      move += std::abs(wi - w[i]);
      w[i] = wi;
    }
    delta = std::abs(lam - lam_prev);
    if (!std::isnan(lam_prev) && delta <= tol && move <= tol) {
      converged = true;
      break;
    }
    lam_prev = lam;
  }
  if (!converged)
    throw Error("sparse-core",
                "power_method did not converge in " + std::to_string(max_iter) +
                    " iterations (last eigenvalue increment " +
                    std::to_string(delta) +
                    "); try a larger tol or a smaller twist parameter");
  PowerResult out;
  out.lambda = lam;
  out.iterations = iter;
  out.residual = delta;
  out.vec = std::move(w);
  const double dn = static_cast<double>(n);
  for (double& x : out.vec) x *= dn;  // sum(vec)/n = 1
  return out;
}

namespace detail {

namespace {

/// Deflated fixed-point solve of sign*(lambda_s I - S^T) w + t*col_scale*v =
/// rhs, phi^T w = 0. Eliminating t through phi (a left eigenvector, so
/// phi^T (lambda_s I - S^T) = 0) gives t in closed form; the remaining
/// system is solved by w <- (S^T w + q)/lambda_s with the leading component
/// projected out each sweep. Returns false when the residual target is not
/// reached (caller falls back to the direct factorization).
bool solve_bordered_iterative(std::int64_t n, const BorderedIterativeHint& h,
                              const std::vector<double>& rhs,
                              GeneralBorderedSolution& sol) {
  const auto un = static_cast<std::size_t>(n);
  const std::vector<double>& v = *h.v;
  const std::vector<double>& phi = *h.phi;
  const double dn = static_cast<double>(n);

  const double t = neumaier_dot(phi, rhs) / (h.col_scale * dn);
  std::vector<double> q(un);
  for (std::size_t i = 0; i < un; ++i)
    q[i] = (rhs[i] - t * h.col_scale * v[i]) / h.sign;

  double rhs_scale = 0.0;
  for (double x : rhs) rhs_scale = std::max(rhs_scale, std::abs(x));
  const double target = 1e-11 * std::max(rhs_scale, 1.0);

  std::vector<double> w(un, 0.0), y(un, 0.0);
  auto project = [&](std::vector<double>& u) {
    const double c = neumaier_dot(phi, u) / dn;
    for (std::size_t i = 0; i < un; ++i) u[i] -= c * v[i];
  };
  auto residual_inf = [&]() {
    h.s->apply_transpose(w, y, h.threads);
    double r = 0.0;
    for (std::size_t i = 0; i < un; ++i) {
      const double row = h.sign * (h.lambda_s * w[i] - y[i]) +
                         h.col_scale * v[i] * t - rhs[i];
      r = std::max(r, std::abs(row));
    }
    r = std::max(r, std::abs(neumaier_dot(phi, w)));
    return r;
  };

  const std::int64_t max_iter = 200000;
  double best = std::numeric_limits<double>::infinity();
  for (std::int64_t k = 1; k <= max_iter; ++k) {
    h.s->apply_transpose(w, y, h.threads);
    for (std::size_t i = 0; i < un; ++i) w[i] = (y[i] + q[i]) / h.lambda_s;
    project(w);
    if (k % 32 == 0 || k == max_iter) {
      const double r = residual_inf();
      if (r <= target) break;
      if (r >= best && k > 256) break;  // stagnated at roundoff level
      best = std::min(best, r);
    }
  }
  const double r = residual_inf();
  if (!(r <= 1e-10 * std::max(rhs_scale, 1.0))) return false;
  sol.w = std::move(w);
  sol.t = t;
  sol.residual_inf = r;
  return true;
}

}  // namespace

GeneralBorderedSolution solve_bordered_general(
    std::int64_t n, const std::vector<Triplet>& a_entries,
    const std::vector<double>& border_col, const std::vector<double>& border_row,
    const std::vector<double>& rhs, const std::string& context,
    const BorderedIterativeHint* hint) {
  // Prefer the deflated-Richardson route when direct factorization would be
  // expensive: either the matrix is dense-ish (kernel-blurred operators) or
  // the dimension is large enough that the dense border row/column causes
  // significant LU fill. The LU path below remains the fallback.
  if (hint != nullptr && hint->s != nullptr && hint->v != nullptr &&
      hint->phi != nullptr && hint->lambda_s > 0.0 &&
      (hint->s->nnz() > 50 * n || n > 10000)) {
    GeneralBorderedSolution sol;
    if (solve_bordered_iterative(n, *hint, rhs, sol)) return sol;
  }
  using SpMat = Eigen::SparseMatrix<double>;
  using EigenTriplet = Eigen::Triplet<double>;
  const auto nn = static_cast<Eigen::Index>(n);
  std::vector<EigenTriplet> trips;
  trips.reserve(a_entries.size() + 2 * static_cast<std::size_t>(n));
  for (const Triplet& t : a_entries)
    trips.emplace_back(static_cast<int>(t.row), static_cast<int>(t.col),
                       t.value);
  for (std::int64_t i = 0; i < n; ++i) {
    const double bc = border_col[static_cast<std::size_t>(i)];
    const double br = border_row[static_cast<std::size_t>(i)];
    if (bc != 0.0) trips.emplace_back(static_cast<int>(i), static_cast<int>(nn), bc);
    if (br != 0.0) trips.emplace_back(static_cast<int>(nn), static_cast<int>(i), br);
  }
  SpMat a(nn + 1, nn + 1);
  a.setFromTriplets(trips.begin(), trips.end());
  a.makeCompressed();

  Eigen::SparseLU<SpMat> lu;
  lu.analyzePattern(a);
  lu.factorize(a);
  if (lu.info() != Eigen::Success)
    throw Error("sparse-core",
                "bordered system is singular in " + context +
                    " — the leading eigenvalue may not be simple at this "
                    "resolution; check the spectral gap");

  Eigen::VectorXd b(nn + 1);
  for (std::int64_t i = 0; i < n; ++i)
    b[static_cast<Eigen::Index>(i)] = rhs[static_cast<std::size_t>(i)];
  b[nn] = 0.0;

  Eigen::VectorXd x = lu.solve(b);
  double rhs_scale = 0.0;
  for (double v : rhs) rhs_scale = std::max(rhs_scale, std::abs(v));
  const double target = 1e-10 * std::max(rhs_scale, 1e-300);
  Eigen::VectorXd resid = b - a * x;
  if (resid.lpNorm<Eigen::Infinity>() > target) {
    // one step of iterative refinement with the existing factorization
    x += lu.solve(resid);
    resid = b - a * x;
  }
  GeneralBorderedSolution sol;
  sol.w.assign(static_cast<std::size_t>(n), 0.0);
  for (std::int64_t i = 0; i < n; ++i)
    sol.w[static_cast<std::size_t>(i)] = x[static_cast<Eigen::Index>(i)];
  sol.t = x[nn];
  sol.residual_inf = resid.lpNorm<Eigen::Infinity>();
  if (!(sol.residual_inf <= 1e-10 * std::max(rhs_scale, 1.0)))
    throw Error("sparse-core",
                "bordered solve residual " + std::to_string(sol.residual_inf) +
                    " too large in " + context +
                    " — system ill-conditioned; check the spectral gap");
  return sol;
}

}  // namespace detail

BorderedSolution solve_bordered(const TransferMatrix& m,
                                const std::vector<double>& v,
                                const std::vector<double>& rhs) {
  const std::int64_t n = m.n();
  if (static_cast<std::int64_t>(v.size()) != n ||
      static_cast<std::int64_t>(rhs.size()) != n)
    throw Error("sparse-core", "solve_bordered: vector length mismatch");
  // A = M^T - I as triplets (transpose by swapping indices)
  std::vector<Triplet> a;
  a.reserve(static_cast<std::size_t>(m.csr().nnz()) +
            static_cast<std::size_t>(n));
  const auto& rp = m.csr().row_ptr();
  const auto& cols = m.csr().cols();
  const auto& vals = m.csr().values();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t k = rp[static_cast<std::size_t>(i)];
         k < rp[static_cast<std::size_t>(i) + 1]; ++k)
      a.push_back({cols[static_cast<std::size_t>(k)], i,
                   vals[static_cast<std::size_t>(k)]});
  for (std::int64_t i = 0; i < n; ++i) a.push_back({i, i, -1.0});

  std::vector<double> border_col(v);
  for (double& x : border_col) x = -x;
  std::vector<double> ones(static_cast<std::size_t>(n), 1.0);

  detail::BorderedIterativeHint hint;
  hint.s = &m.csr();
  hint.lambda_s = 1.0;
  hint.sign = -1.0;  // A = M^T - I = -(1*I - M^T)
  hint.col_scale = -1.0;
  hint.v = &v;
  hint.phi = &ones;

  detail::GeneralBorderedSolution gen = detail::solve_bordered_general(
      n, a, border_col, ones, rhs, "the variance bordered solve", &hint);
  BorderedSolution out;
  out.dv = std::move(gen.w);
  out.dlam = gen.t;
  out.residual_inf = gen.residual_inf;
  return out;
}

double spectral_gap_probe(const TransferMatrix& m, double tol,
                          std::int64_t max_iter, int threads) {
  const std::int64_t n = m.n();
  // Leading pair first: v from a tight power iteration, phi = 1 (Markov).
  std::vector<double> ones(static_cast<std::size_t>(n), 1.0);
  const double inner_tol = std::min(1e-12, tol);
  PowerResult lead =
      power_method(m.csr(), ones, Side::kRight, inner_tol, max_iter, threads);
  const std::vector<double>& v = lead.vec;  // sum(v)/n = 1

  // Deterministic pseudo-random start, deflated against the leading space.
  std::mt19937_64 rng(0x5eedc0de5eedc0deULL);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> w(static_cast<std::size_t>(n));
  for (double& x : w) x = unif(rng);

  const double dn = static_cast<double>(n);
  auto deflate = [&](std::vector<double>& u) {
    // Pi u = (1^T u / n) v, so subtract the leading component.
    const double c = neumaier_sum(u) / dn;
    for (std::size_t i = 0; i < u.size(); ++i)
      u[i] -= c * v[i];
  };
  auto norm2 = [](const std::vector<double>& u) {
    double acc = 0.0;
    for (double x : u) acc += x * x;
    return std::sqrt(acc);
  };

  deflate(w);
  double nw = norm2(w);
  if (nw < 1e-14) return 0.0;  // start vector lay in the leading space
  for (double& x : w) x /= nw;

  std::vector<double> u(static_cast<std::size_t>(n), 0.0);
  double ratio_prev = std::numeric_limits<double>::quiet_NaN();
  for (std::int64_t iter = 0; iter < max_iter; ++iter) {
    m.csr().apply_transpose(w, u, threads);
    deflate(u);
    const double ratio = norm2(u);
    if (ratio < 1e-14) return 0.0;  // complement is (numerically) nilpotent
    for (std::size_t i = 0; i < u.size(); ++i) w[i] = u[i] / ratio;
    if (!std::isnan(ratio_prev) && std::abs(ratio - ratio_prev) <= tol)
      return ratio;
    ratio_prev = ratio;
  }
  throw Error("sparse-core",
              "spectral_gap_probe did not converge (oscillating growth "
              "ratio — second eigenvalue may be complex)");
}

}  // namespace transferlab
