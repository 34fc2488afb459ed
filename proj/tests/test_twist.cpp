#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <vector>

#include "transferlab/errors.hpp"
#include "transferlab/maps.hpp"
#include "transferlab/sparse.hpp"
#include "transferlab/twist.hpp"
#include "transferlab/ulam.hpp"

using transferlab::DiscretizedObservable;
using transferlab::Error;
using transferlab::PartitionDescriptor;
using transferlab::SparseCsr;
using transferlab::SpectralData;
using transferlab::TransferMatrix;
using transferlab::TwistedMatrix;

namespace {

TransferMatrix two_cell_doubling() {
  PartitionDescriptor pd;
  pd.dim = 1;
  pd.cells_per_axis = 2;
  return TransferMatrix(
      SparseCsr::from_triplets(
          2, {{0, 0, 0.5}, {0, 1, 0.5}, {1, 0, 0.5}, {1, 1, 0.5}}),
      pd, "doubling");
}

TransferMatrix tent_operator(std::int64_t n) {
  return transferlab::build_ulam_1d(transferlab::make_double_tent(2.1), n);
}

DiscretizedObservable weights(std::vector<double> v) {
  DiscretizedObservable g;
  g.values = std::move(v);
  g.observable_name = "custom-weights";
  return g;
}

}  // namespace

TEST_CASE("zero twist reproduces the base operator bit for bit") {
  const TransferMatrix p = tent_operator(64);
  const DiscretizedObservable g =
      transferlab::discretize_observable(transferlab::Observable::sin2pi(), 64);
  const TwistedMatrix t = transferlab::twist(p, g, 0.0);
  CHECK(t.z() == 0.0);
  CHECK(t.log_scale() == 0.0);
  CHECK(t.scaled().values() == p.csr().values());
  CHECK(t.scaled().cols() == p.csr().cols());
  CHECK(t.g() == g.values);
}

TEST_CASE("twist multiplies row i by exp(z g_i)") {
  // 2-cell doubling, g = (1, -1), z = ln 2: row 0 scales by 2, row 1 by 1/2.
  const TransferMatrix p = two_cell_doubling();
  const double z = std::log(2.0);
  const TwistedMatrix t = transferlab::twist(p, weights({1.0, -1.0}), z);
  CHECK(t.log_scale() == z);  // c = max_i z*g_i = z * 1 exactly
  CHECK(t.entry(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(t.entry(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(t.entry(1, 0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(t.entry(1, 1) == doctest::Approx(0.25).epsilon(1e-15));
  // The factored storage keeps entries at or below O(1).
  for (double s : t.scaled().values()) CHECK(std::abs(s) <= 1.0 + 1e-15);
}

TEST_CASE("twist is additive in z entry by entry") {
  const TransferMatrix p = tent_operator(50);
  const DiscretizedObservable g =
      transferlab::discretize_observable(transferlab::Observable::cos2pi(), 50);
  const double z1 = 0.7, z2 = -0.3;
  const TwistedMatrix ta = transferlab::twist(p, g, z1 + z2);
  const TwistedMatrix tb = transferlab::twist(p, g, z1);
  const auto& rows = tb.scaled().row_ptr();
  const auto& cols = tb.scaled().cols();
  for (std::int64_t i = 0; i < 50; ++i) {
    const double extra = std::exp(z2 * g.values[static_cast<std::size_t>(i)]);
    for (std::int64_t k = rows[static_cast<std::size_t>(i)];
         k < rows[static_cast<std::size_t>(i) + 1]; ++k) {
      const std::int64_t j = cols[static_cast<std::size_t>(k)];
      CHECK(ta.entry(i, j) ==
            doctest::Approx(tb.entry(i, j) * extra).epsilon(1e-14));
    }
  }
}

TEST_CASE("twist validates weight length, twist size, and overflow headroom") {
  const TransferMatrix p = two_cell_doubling();
  CHECK_THROWS_AS(transferlab::twist(p, weights({1.0}), 0.1), Error);
  CHECK_THROWS_AS(transferlab::twist(p, weights({1.0, -1.0}), 25.0), Error);
  CHECK_NOTHROW(transferlab::twist(p, weights({1.0, -1.0}), 25.0, 30.0));
  // Even with a permissive z_max, z * g beyond exp() range must be refused.
  CHECK_THROWS_AS(transferlab::twist(p, weights({100.0, -100.0}), 8.0, 1000.0),
                  Error);
  const double nan = std::nan("");
  CHECK_THROWS_AS(transferlab::twist(p, weights({nan, 0.0}), 0.1), Error);
}

TEST_CASE("leading eigendata at zero twist recovers the Markov structure") {
  const TransferMatrix p = tent_operator(500);
  const SpectralData sd = transferlab::leading_eigendata(p);
  CHECK(std::abs(sd.lambda - 1.0) <= 5e-12);
  CHECK(std::abs(sd.log_lambda) <= 5e-12);
  CHECK(sd.residual <= transferlab::kDefaultEigTol);

  double vsum = 0.0, pairing = 0.0;
  for (std::size_t i = 0; i < 500; ++i) {
    vsum += sd.right[i];
    pairing += sd.left[i] * sd.right[i];
    CHECK(sd.right[i] >= -1e-12);  // Perron vector of a positive operator
  }
  CHECK(std::abs(vsum / 500.0 - 1.0) <= 1e-12);
  CHECK(std::abs(pairing / 500.0 - 1.0) <= 1e-12);
  // For a row-stochastic matrix the left eigenvector is constant.
  for (std::size_t i = 0; i < 500; ++i)
    CHECK(sd.left[i] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("eigendata normalization holds away from zero twist") {
  const TransferMatrix p = tent_operator(500);
  const DiscretizedObservable g = transferlab::discretize_observable(
      transferlab::Observable::sin2pi(), 500);
  const TwistedMatrix t = transferlab::twist(p, g, 0.5);
  const SpectralData sd = transferlab::leading_eigendata(t);
  CHECK(sd.lambda > 0.0);
  CHECK(sd.log_lambda == doctest::Approx(std::log(sd.lambda)).epsilon(1e-13));
  double vsum = 0.0, pairing = 0.0;
  for (std::size_t i = 0; i < 500; ++i) {
    vsum += sd.right[i];
    pairing += sd.left[i] * sd.right[i];
    CHECK(sd.right[i] >= -1e-12);
  }
  CHECK(std::abs(vsum / 500.0 - 1.0) <= 1e-12);
  CHECK(std::abs(pairing / 500.0 - 1.0) <= 1e-12);
}

TEST_CASE("warm starts validate dimensions and accelerate convergence") {
  const TransferMatrix p = tent_operator(500);
  const DiscretizedObservable g = transferlab::discretize_observable(
      transferlab::Observable::sin2pi(), 500);
  const SpectralData cold =
      transferlab::leading_eigendata(transferlab::twist(p, g, 0.3));
  const SpectralData warm = transferlab::leading_eigendata(
      transferlab::twist(p, g, 0.30001), &cold);
  CHECK(warm.iterations < cold.iterations);
  CHECK(std::abs(warm.lambda - cold.lambda) <= 1e-4);

  SpectralData bad = cold;
  bad.right.resize(10);
  CHECK_THROWS_AS(
      transferlab::leading_eigendata(transferlab::twist(p, g, 0.3), &bad),
      Error);
}

TEST_CASE("first derivative of the leading eigenvalue in the twist parameter") {
  const std::int64_t n = 500;
  const TransferMatrix p = tent_operator(n);
  const SpectralData base = transferlab::leading_eigendata(p);

  // Centered weights: derivative at z = 0 is the invariant mean, i.e. 0.
  const DiscretizedObservable centered = transferlab::center_against(
      transferlab::discretize_observable(transferlab::Observable::cos2pi(), n),
      base.right);
  const TwistedMatrix t0 = transferlab::twist(p, centered, 0.0);
  const SpectralData sd0 = transferlab::leading_eigendata(t0);
  CHECK(std::abs(transferlab::lambda_prime(t0, sd0)) <= 1e-10);

  // Uncentered weights: derivative at z = 0 equals the invariant mean.
  const DiscretizedObservable raw =
      transferlab::discretize_observable(transferlab::Observable::cos2pi(), n);
  double mean = 0.0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i)
    mean += raw.values[i] * base.right[i];
  mean /= static_cast<double>(n);
  const TwistedMatrix traw = transferlab::twist(p, raw, 0.0);
  CHECK(std::abs(transferlab::lambda_prime(traw, base) - mean) <= 1e-12);

  // Off-origin: match a centered finite difference of lambda(z).
  const double z = 0.3, h = 1e-4, tol = 1e-13;
  auto lam = [&](double zz) {
    return transferlab::leading_eigendata(transferlab::twist(p, raw, zz),
                                          nullptr, tol)
        .lambda;
  };
  const TwistedMatrix tz = transferlab::twist(p, raw, z);
  const SpectralData sdz = transferlab::leading_eigendata(tz, nullptr, tol);
  const double fd = (lam(z + h) - lam(z - h)) / (2.0 * h);
  CHECK(std::abs(transferlab::lambda_prime(tz, sdz) - fd) <= 1e-6);
}

TEST_CASE("second derivative matches a finite difference off the origin") {
  const std::int64_t n = 500;
  const TransferMatrix p = tent_operator(n);
  const DiscretizedObservable g = transferlab::discretize_observable(
      transferlab::Observable::sin2pi(), n);
  const double z = 0.2, h = 1e-3, tol = 1e-13;
  auto lam = [&](double zz) {
    return transferlab::leading_eigendata(transferlab::twist(p, g, zz), nullptr,
                                          tol)
        .lambda;
  };
  const TwistedMatrix tz = transferlab::twist(p, g, z);
  const SpectralData sd = transferlab::leading_eigendata(tz, nullptr, tol);
  const double fd = (lam(z + h) - 2.0 * lam(z) + lam(z - h)) / (h * h);
  const double got = transferlab::lambda_second_general(tz, sd);
  CHECK(std::abs(got - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
}

TEST_CASE("constant-zero weights freeze the eigenvalue curve") {
  const std::int64_t n = 200;
  const TransferMatrix p = tent_operator(n);
  const DiscretizedObservable g =
      weights(std::vector<double>(static_cast<std::size_t>(n), 0.0));
  const TwistedMatrix t = transferlab::twist(p, g, 0.4);
  const SpectralData sd = transferlab::leading_eigendata(t);
  CHECK(std::abs(sd.lambda - 1.0) <= 1e-12);
  CHECK(std::abs(transferlab::lambda_prime(t, sd)) <= 1e-12);
  CHECK(std::abs(transferlab::lambda_second_general(t, sd)) <= 1e-12);
}

TEST_CASE("log of the leading eigenvalue is convex along the twist axis") {
  const std::int64_t n = 300;
  const TransferMatrix p = tent_operator(n);
  const SpectralData base = transferlab::leading_eigendata(p);
  const DiscretizedObservable g = transferlab::center_against(
      transferlab::discretize_observable(transferlab::Observable::sin2pi(), n),
      base.right);
  const std::vector<double> zs = {-0.5, -0.2, 0.0, 0.2, 0.5};
  std::vector<double> logs;
  for (double z : zs) {
    const SpectralData sd =
        transferlab::leading_eigendata(transferlab::twist(p, g, z));
    CHECK(sd.lambda > 0.0);
    logs.push_back(sd.log_lambda);
  }
  for (std::size_t k = 1; k + 1 < zs.size(); ++k) {
    const double hl = zs[k] - zs[k - 1];
    const double hr = zs[k + 1] - zs[k];
    const double secant =
        (logs[k + 1] - logs[k]) / hr - (logs[k] - logs[k - 1]) / hl;
    CHECK(secant >= -1e-10);
  }
  // Minimum at z = 0 for centered weights.
  CHECK(std::abs(logs[2]) <= 5e-12);
}

TEST_CASE("eigenvalue curve sampler matches pointwise eigensolves") {
  const std::int64_t n = 200;
  const TransferMatrix p = tent_operator(n);
  const SpectralData base = transferlab::leading_eigendata(p);
  const DiscretizedObservable g = transferlab::center_against(
      transferlab::discretize_observable(transferlab::Observable::linear(), n),
      base.right);
  const std::vector<double> zs = {-0.4, -0.1, 0.0, 0.1, 0.4};

  const transferlab::TwistSpectralCurve curve = transferlab::twist_curve(
      p, g, zs, transferlab::kDefaultEigTol, transferlab::kDefaultZMax, true);
  REQUIRE(curve.z_values == zs);
  REQUIRE(curve.lambda.size() == zs.size());
  REQUIRE(curve.log_lambda.size() == zs.size());
  REQUIRE(curve.lambda_prime.size() == zs.size());
  REQUIRE(curve.lambda_second.size() == zs.size());
  REQUIRE(curve.eigendata.size() == zs.size());

  for (std::size_t k = 0; k < zs.size(); ++k) {
    const TwistedMatrix t = transferlab::twist(p, g, zs[k]);
    const SpectralData sd = transferlab::leading_eigendata(t);
    CHECK(std::abs(curve.lambda[k] - sd.lambda) <= 1e-10);
    CHECK(std::abs(curve.lambda_prime[k] - transferlab::lambda_prime(t, sd)) <=
          1e-8);
    CHECK(curve.lambda_second[k] > 0.0);  // strict convexity on this map
    CHECK(curve.eigendata[k].right.size() == static_cast<std::size_t>(n));
  }
  CHECK(std::abs(curve.lambda[2] - 1.0) <= 5e-12);

  const transferlab::TwistSpectralCurve slim = transferlab::twist_curve(
      p, g, zs, transferlab::kDefaultEigTol, transferlab::kDefaultZMax, false);
  CHECK(slim.eigendata.empty());
  CHECK(std::abs(slim.lambda[1] - curve.lambda[1]) <= 1e-12);
}
