#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <iostream>
#include <sstream>
#include <vector>

#include "transferlab/errors.hpp"
#include "transferlab/maps.hpp"
#include "transferlab/perturb.hpp"
#include "transferlab/sparse.hpp"
#include "transferlab/ulam.hpp"

using transferlab::ConvergenceStudy;
using transferlab::Error;
using transferlab::KernelSpec;
using transferlab::Observable;
using transferlab::PartitionDescriptor;
using transferlab::SparseCsr;
using transferlab::StudyMode;
using transferlab::StudyOptions;
using transferlab::StudyPoint;
using transferlab::TransferMatrix;

namespace {

TransferMatrix tent_operator(std::int64_t n) {
  return transferlab::build_ulam_1d(transferlab::make_double_tent(2.1), n);
}

KernelSpec uniform(double eps, KernelSpec::Boundary b =
                                   KernelSpec::Boundary::kReflect) {
  KernelSpec k;
  k.shape = KernelSpec::Shape::kUniform;
  k.eps = eps;
  k.boundary = b;
  return k;
}

}  // namespace

TEST_CASE("uniform kernel rows: exact thirds inside, folded at the edge") {
  const std::int64_t n = 9;
  const SparseCsr km = transferlab::kernel_matrix(n, uniform(1.5 / 9.0));
  // Interior row: half-width 1.5 cells covers exactly three cells evenly.
  for (std::int64_t j : {3, 4, 5})
    CHECK(km.entry(4, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  // Band edges land exactly on cell boundaries; interval overlap in floating
  // point may leave a one-ulp sliver just outside the band.
  CHECK(std::abs(km.entry(4, 2)) <= 1e-15);
  CHECK(std::abs(km.entry(4, 6)) <= 1e-15);
  // Edge row 0: the third that leaves [0,1] reflects back onto cell 0.
  CHECK(km.entry(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(km.entry(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  // Reflection keeps the kernel bistochastic: columns also sum to one.
  std::vector<double> ones(static_cast<std::size_t>(n), 1.0), colsum;
  km.apply_transpose(ones, colsum);
  for (double c : colsum) CHECK(std::abs(c - 1.0) <= 1e-12);
  for (double s : km.row_sums()) CHECK(std::abs(s - 1.0) <= 1e-14);
}

TEST_CASE("triangular kernel rows integrate the hat density exactly") {
  const std::int64_t n = 9;
  KernelSpec k = uniform(1.5 / 9.0);
  k.shape = KernelSpec::Shape::kTriangular;
  const SparseCsr km = transferlab::kernel_matrix(n, k);
  CHECK(km.entry(4, 3) == doctest::Approx(2.0 / 9.0).epsilon(1e-14));
  CHECK(km.entry(4, 4) == doctest::Approx(5.0 / 9.0).epsilon(1e-14));
  CHECK(km.entry(4, 5) == doctest::Approx(2.0 / 9.0).epsilon(1e-14));
  for (double s : km.row_sums()) CHECK(std::abs(s - 1.0) <= 1e-14);
}

TEST_CASE("renormalize boundary drops escaping mass and rescales the row") {
  const std::int64_t n = 9;
  const SparseCsr km = transferlab::kernel_matrix(
      n, uniform(1.5 / 9.0, KernelSpec::Boundary::kRenormalize));
  // Row 0 loses the escaping third, then (1/3, 1/3) rescales to (1/2, 1/2).
  CHECK(km.entry(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(km.entry(0, 1) == doctest::Approx(0.5).epsilon(1e-14));
  for (double s : km.row_sums()) CHECK(std::abs(s - 1.0) <= 1e-14);
}

TEST_CASE("kernel smoothing keeps the operator row-stochastic") {
  const TransferMatrix p = tent_operator(120);
  for (auto b : {KernelSpec::Boundary::kReflect,
                 KernelSpec::Boundary::kRenormalize}) {
    const TransferMatrix q = transferlab::apply_kernel(p, uniform(0.05, b));
    CHECK(q.n() == p.n());
    for (double s : q.csr().row_sums()) CHECK(std::abs(s - 1.0) <= 1e-12);
    CHECK(q.csr().nnz() > p.csr().nnz());  // the band widens the stencil
  }
}

TEST_CASE("a kernel much narrower than a cell is the identity, with a warning") {
  const TransferMatrix p = tent_operator(50);  // cell width 0.02
  std::ostringstream captured;
  std::streambuf* old = std::cerr.rdbuf(captured.rdbuf());
  const TransferMatrix q = transferlab::apply_kernel(p, uniform(0.001));
  std::cerr.rdbuf(old);
  CHECK(captured.str().find("below the cell width") != std::string::npos);
  CHECK(q.csr().values() == p.csr().values());
  CHECK(q.csr().cols() == p.csr().cols());
}

TEST_CASE("kernel validation: bad widths and unsupported dimension") {
  const TransferMatrix p = tent_operator(20);
  CHECK_THROWS_AS(transferlab::apply_kernel(p, uniform(0.0)), Error);
  CHECK_THROWS_AS(transferlab::apply_kernel(p, uniform(-0.1)), Error);
  CHECK_THROWS_AS(transferlab::apply_kernel(p, uniform(1.5)), Error);
  CHECK_THROWS_AS(transferlab::kernel_matrix(0, uniform(0.1)), Error);

  PartitionDescriptor pd;
  pd.dim = 2;
  pd.cells_per_axis = 2;
  const TransferMatrix p2(
      SparseCsr::from_triplets(4, {{0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0},
                                   {3, 3, 1.0}}),
      pd, "identity-2d");
  CHECK_THROWS_AS(transferlab::apply_kernel(p2, uniform(0.1)), Error);
}

TEST_CASE("grid-refinement study measures convergence toward the finest grid") {
  // Grid sizes deep enough into the asymptotic regime that deviations from
  // the reference shrink monotonically (coarser grids can oscillate).
  ConvergenceStudy st = transferlab::run_convergence_study(
      transferlab::make_double_tent(2.1), Observable::sin2pi(),
      StudyMode::kRefineN, {200.0, 1000.0, 5000.0}, {0.0, 0.3},
      {0.0, 0.2, 0.4});

  CHECK(st.mode == StudyMode::kRefineN);
  CHECK(st.map == "double-tent");
  CHECK(st.observable == "sin2pi");
  REQUIRE(st.points.size() == 3);
  CHECK(st.reference_index == 2);
  REQUIRE(st.parameter_grid.size() == 3);
  CHECK(st.parameter_grid[0] == doctest::Approx(1.0 / 200.0).epsilon(1e-16));
  CHECK(st.parameter_grid[2] == doctest::Approx(1.0 / 5000.0).epsilon(1e-16));

  for (const StudyPoint& pt : st.points) {
    REQUIRE_FALSE(pt.has_error);
    CHECK(pt.eps == 0.0);
    CHECK(std::abs(pt.lambda_at_z.at(0.0) - 1.0) <= 5e-12);
    CHECK(pt.lambda_at_z.at(0.3) > 1.0);
    CHECK(pt.sigma2 > 0.0);
    CHECK(std::abs(pt.rate_values.at(0.0)) <= 1e-8);
    CHECK(pt.rate_values.at(0.4) > pt.rate_values.at(0.2));
  }
  CHECK(st.points[0].n == 200);
  CHECK(st.points[2].n == 5000);

  const std::vector<double> sdev = transferlab::sigma2_deviation(st);
  REQUIRE(sdev.size() == 3);
  CHECK(sdev[2] == 0.0);
  CHECK(sdev[0] > sdev[1]);  // coarser grid sits farther from the reference

  const std::vector<double> rdev = transferlab::rate_uniform_deviation(st);
  REQUIRE(rdev.size() == 3);
  CHECK(rdev[2] == 0.0);
  CHECK(rdev[0] >= rdev[1]);

  CHECK(st.fit_points == 2);
  CHECK(std::isfinite(st.fitted_exponent));
  CHECK(st.fitted_exponent > 0.0);  // deviations shrink as the grid refines
}

TEST_CASE("kernel-width study appends a zero-noise baseline as reference") {
  StudyOptions opts;
  opts.fixed_n = 200;
  ConvergenceStudy st = transferlab::run_convergence_study(
      transferlab::make_double_tent(2.1), Observable::sin2pi(),
      StudyMode::kKernelEps, {0.1, 0.05, 0.025}, {0.0}, {}, opts);

  REQUIRE(st.points.size() == 4);  // three eps values + the eps = 0 baseline
  CHECK(st.reference_index == 3);
  CHECK(st.points[3].eps == 0.0);
  CHECK(st.points[3].parameter == 0.0);
  for (const StudyPoint& pt : st.points) {
    REQUIRE_FALSE(pt.has_error);
    CHECK(pt.n == 200);
    CHECK(std::abs(pt.lambda_at_z.at(0.0) - 1.0) <= 5e-12);
    CHECK(pt.rate_values.empty());  // s probe was skipped
  }
  CHECK(st.points[0].eps == 0.1);
  CHECK(st.points[2].eps == 0.025);

  const std::vector<double> sdev = transferlab::sigma2_deviation(st);
  REQUIRE(sdev.size() == 4);
  CHECK(sdev[0] > sdev[1]);
  CHECK(sdev[1] > sdev[2]);
  CHECK(sdev[2] > 0.0);
  CHECK(sdev[3] == 0.0);
}

TEST_CASE("study grids are validated per mode") {
  const auto map = transferlab::make_double_tent(2.1);
  const Observable g = Observable::sin2pi();
  // Too few points to measure a trend.
  CHECK_THROWS_AS(transferlab::run_convergence_study(
                      map, g, StudyMode::kRefineN, {50.0, 100.0}, {0.0}, {}),
                  Error);
  // refine_n needs ascending integers >= 2.
  CHECK_THROWS_AS(
      transferlab::run_convergence_study(map, g, StudyMode::kRefineN,
                                         {50.5, 100.0, 200.0}, {0.0}, {}),
      Error);
  CHECK_THROWS_AS(
      transferlab::run_convergence_study(map, g, StudyMode::kRefineN,
                                         {100.0, 50.0, 200.0}, {0.0}, {}),
      Error);
  CHECK_THROWS_AS(
      transferlab::run_convergence_study(map, g, StudyMode::kRefineN,
                                         {1.0, 50.0, 100.0}, {0.0}, {}),
      Error);
  // kernel_eps needs positive values descending toward zero.
  CHECK_THROWS_AS(
      transferlab::run_convergence_study(map, g, StudyMode::kKernelEps,
                                         {0.025, 0.05, 0.1}, {0.0}, {}),
      Error);
  CHECK_THROWS_AS(
      transferlab::run_convergence_study(map, g, StudyMode::kKernelEps,
                                         {0.1, 0.05, 0.0}, {0.0}, {}),
      Error);
}

TEST_CASE("deviation helpers reject broken or incomparable study points") {
  ConvergenceStudy st;
  st.points.resize(2);
  st.reference_index = 1;
  st.points[0].sigma2 = 1.5;
  st.points[0].rate_values = {{0.0, 0.0}, {0.2, 0.1}};
  st.points[1].sigma2 = 1.0;
  st.points[1].rate_values = {{0.0, 0.0}, {0.2, 0.08}};

  const auto sdev = transferlab::sigma2_deviation(st);
  CHECK(sdev[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(sdev[1] == 0.0);
  const auto rdev = transferlab::rate_uniform_deviation(st);
  CHECK(rdev[0] == doctest::Approx(0.02).epsilon(1e-12));

  ConvergenceStudy mismatched = st;
  mismatched.points[0].rate_values = {{0.0, 0.0}, {0.3, 0.1}};
  CHECK_THROWS_AS(transferlab::rate_uniform_deviation(mismatched), Error);

  ConvergenceStudy broken = st;
  broken.points[0].has_error = true;
  broken.points[0].error = "synthetic failure";
  CHECK_THROWS_AS(transferlab::sigma2_deviation(broken), Error);
  CHECK_THROWS_AS(transferlab::rate_uniform_deviation(broken), Error);
}
