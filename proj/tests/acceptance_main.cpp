// Acceptance suite: one pass/fail line per criterion on stdout, nonzero exit
// when any criterion fails. Tolerances are pinned in code next to each check.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <map>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "transferlab/maps.hpp"
#include "transferlab/perturb.hpp"
#include "transferlab/sparse.hpp"
#include "transferlab/statistics.hpp"
#include "transferlab/twist.hpp"
#include "transferlab/ulam.hpp"

namespace {

using transferlab::Observable;
using transferlab::RateOptions;
using transferlab::SpectralData;
using transferlab::TransferMatrix;
using transferlab::TwistedMatrix;

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         t0_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ =
      std::chrono::steady_clock::now();
};

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    pass = false;
    if (!detail.empty()) detail += "; ";
    detail += why;
  }
  void require(bool cond, const std::string& why) {
    if (!cond) fail(why);
  }
};

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

const std::vector<Observable>& all_observables() {
  static const std::vector<Observable> obs = {
      Observable::cos2pi(), Observable::linear(), Observable::sin2pi(),
      Observable::indicator_half()};
  return obs;
}

// ---------------------------------------------------------------- criteria

// Benchmark variance table: four observables at four resolutions, 5e-4
// absolute. The n=25000 column is timed and must stay under 60 s.
Outcome criterion_1(const std::map<std::int64_t, TransferMatrix>& ops) {
  Outcome out;
  const std::map<std::string, std::map<std::int64_t, double>> expected = {
      {"cos2pi",
       {{200, 0.51057}, {1000, 0.50496}, {5000, 0.50430}, {25000, 0.50396}}},
      {"linear",
       {{200, 4.3355}, {1000, 4.2886}, {5000, 4.2871}, {25000, 4.2860}}},
      {"sin2pi",
       {{200, 6.5368}, {1000, 6.4959}, {5000, 6.4950}, {25000, 6.4936}}},
      {"indicator_half",
       {{200, 17.006}, {1000, 16.859}, {5000, 16.855}, {25000, 16.851}}}};

  double fine_seconds = 0.0;
  for (const auto& [n, p] : ops) {
    const Timer t;
    for (const Observable& g : all_observables()) {
      const double sigma2 = transferlab::variance(p, g).sigma2;
      const double want = expected.at(g.name()).at(n);
      if (std::abs(sigma2 - want) > 5e-4)
        out.fail(g.name() + " n=" + std::to_string(n) + ": " + num(sigma2) +
                 " vs " + num(want));
    }
    if (n == 25000) fine_seconds = t.seconds();
  }
  out.require(fine_seconds < 60.0,
              "n=25000 column took " + num(fine_seconds) + " s (limit 60)");
  out.detail = "16 values within 5e-4; n=25000 column " + num(fine_seconds) +
               " s" + (out.pass ? "" : "; " + out.detail);
  return out;
}

// Large-deviation route and restricted-operator route to the same number.
Outcome criterion_2(const TransferMatrix& p1000) {
  Outcome out;
  RateOptions ro;
  ro.opt_tol = 1e-13;
  ro.eig_tol = 1e-13;
  const auto rr = transferlab::rate_function(
      {1.0 - 1e-15}, p1000, Observable::indicator_half(), ro);
  const auto esc = transferlab::escape_rate(
      p1000, transferlab::cells_in_interval(1000, 0.0, 0.5), 1e-13);
  const double rate = rr.r.at(0);
  const double ref = 0.0487901641694;
  out.require(std::abs(rate - esc.escape_rate) <= 1e-12,
              "|rate - escape| = " + num(std::abs(rate - esc.escape_rate)));
  out.require(std::abs(rate - ref) <= 1e-11,
              "rate " + num(rate) + " vs " + num(ref));
  out.require(std::abs(esc.escape_rate - ref) <= 1e-11,
              "escape " + num(esc.escape_rate) + " vs " + num(ref));
  if (out.pass)
    out.detail = "rate and escape agree to " +
                 num(std::abs(rate - esc.escape_rate));
  return out;
}

// Second-eigenvalue probe. Dense eigensolves at n in {200, 1000, 5000} put
// lambda_2 of this operator family at 0.8709-0.8717; the probe must land
// there (0.8709 +/- 0.01 at n=25000, 0.8713 +/- 0.02 at n=5000).
Outcome criterion_3(const std::map<std::int64_t, TransferMatrix>& ops) {
  Outcome out;
  const double fine = transferlab::spectral_gap_probe(ops.at(25000));
  const double mid = transferlab::spectral_gap_probe(ops.at(5000));
  out.require(std::abs(fine - 0.8709) <= 0.01,
              "probe(25000) = " + num(fine) + " vs 0.8709 +/- 0.01");
  out.require(std::abs(mid - 0.8713) <= 0.02,
              "probe(5000) = " + num(mid) + " vs 0.8713 +/- 0.02");
  if (out.pass)
    out.detail = "probe(25000) = " + num(fine) + ", probe(5000) = " + num(mid);
  return out;
}

// Qualitative shape of the four rate functions on a shared s grid.
Outcome criterion_4(const TransferMatrix& p1000) {
  Outcome out;
  std::vector<double> s_grid;
  for (int k = 0; k <= 80; ++k) s_grid.push_back(0.01 * k);

  std::map<std::string, std::vector<double>> curves;
  RateOptions ro;
  ro.opt_tol = 1e-8;
  for (const Observable& g : all_observables())
    curves[g.name()] = transferlab::rate_function(s_grid, p1000, g, ro).r;

  const auto& rc = curves.at("cos2pi");
  const auto& rl = curves.at("linear");
  const auto& rs = curves.at("sin2pi");
  const auto& ri = curves.at("indicator_half");
  for (std::size_t k = 1; k < s_grid.size() && s_grid[k] < 0.6; ++k) {
    if (!(rc[k] > rl[k] && rl[k] > rs[k] && ri[k] < rs[k])) {
      out.fail("ordering broken at s = " + num(s_grid[k]));
      break;
    }
  }
  const double cross = std::abs(rl.back() - rs.back());
  out.require(cross < 0.05,
              "|r_linear(0.8) - r_sin2pi(0.8)| = " + num(cross));
  if (out.pass)
    out.detail = "cos2pi > linear > sin2pi > indicator_half on (0,0.6); "
                 "linear/sin2pi gap at s=0.8 is " +
                 num(cross);
  return out;
}

// Exact eigenvalue derivatives against central finite differences, and the
// two independent variance routes against each other.
Outcome criterion_5(const TransferMatrix& p1000) {
  Outcome out;
  const Timer t;
  const double tol = 1e-13;
  const SpectralData base = transferlab::leading_eigendata(p1000, nullptr, tol);

  for (const Observable& g : all_observables()) {
    const auto dg = transferlab::center_against(
        transferlab::discretize_observable(g, 1000), base.right);
    SpectralData warm = base;
    auto lambda_at = [&](double z) {
      const TwistedMatrix tm = transferlab::twist(p1000, dg, z);
      warm = transferlab::leading_eigendata(tm, &warm, tol);
      return warm.lambda;
    };
    for (double z : {-0.5, -0.2, 0.0, 0.2, 0.5}) {
      const TwistedMatrix tm = transferlab::twist(p1000, dg, z);
      const SpectralData sd = transferlab::leading_eigendata(tm, &warm, tol);
      warm = sd;
      const double lp = transferlab::lambda_prime(tm, sd);
      const double ls = transferlab::lambda_second_general(tm, sd);

      const double h1 = 1e-4, h2 = 1e-3;
      const double fd1 = (lambda_at(z + h1) - lambda_at(z - h1)) / (2.0 * h1);
      const double fd2 =
          (lambda_at(z + h2) - 2.0 * sd.lambda + lambda_at(z - h2)) /
          (h2 * h2);
      const double rel1 = std::abs(lp - fd1) / std::max(1.0, std::abs(fd1));
      const double rel2 = std::abs(ls - fd2) / std::max(1.0, std::abs(fd2));
      if (rel1 > 1e-6)
        out.fail(g.name() + " z=" + num(z) + ": lambda' off by " + num(rel1));
      if (rel2 > 1e-4)
        out.fail(g.name() + " z=" + num(z) + ": lambda'' off by " + num(rel2));
    }

    const double direct = transferlab::variance(p1000, g).sigma2;
    const double resolvent =
        transferlab::variance_via_second_derivative(p1000, g);
    const double rel =
        std::abs(direct - resolvent) / std::max(1.0, std::abs(direct));
    if (rel > 1e-8)
      out.fail(g.name() + ": variance routes differ by " + num(rel));
  }

  const double sec = t.seconds();
  out.require(sec < 30.0, "took " + num(sec) + " s (limit 30)");
  if (out.pass)
    out.detail = "20 derivative points and 4 variance pairs agree; " +
                 num(sec) + " s";
  return out;
}

// Convexity, normalization, and the quadratic small-deviation law.
Outcome criterion_6(const std::map<std::int64_t, TransferMatrix>& ops) {
  Outcome out;
  const Timer t;
  const TransferMatrix& p1000 = ops.at(1000);

  for (std::int64_t n : {std::int64_t{200}, std::int64_t{1000}}) {
    for (double s : ops.at(n).csr().row_sums())
      if (std::abs(s - 1.0) > 1e-12) out.fail("row sum off at n=" +
                                              std::to_string(n));
  }
  transferlab::KernelSpec ks;
  ks.eps = 0.05;
  for (auto b : {transferlab::KernelSpec::Boundary::kReflect,
                 transferlab::KernelSpec::Boundary::kRenormalize}) {
    ks.boundary = b;
    for (double s : transferlab::apply_kernel(p1000, ks).csr().row_sums())
      if (std::abs(s - 1.0) > 1e-12) out.fail("kernel-smoothed row sum off");
  }

  const SpectralData base = transferlab::leading_eigendata(p1000);
  const auto dg = transferlab::center_against(
      transferlab::discretize_observable(Observable::sin2pi(), 1000),
      base.right);
  std::vector<double> zs;
  for (int k = -5; k <= 5; ++k) zs.push_back(0.1 * k);
  const auto curve = transferlab::twist_curve(p1000, dg, zs);
  for (std::size_t k = 1; k + 1 < zs.size(); ++k) {
    const double secant = curve.log_lambda[k + 1] -
                          2.0 * curve.log_lambda[k] + curve.log_lambda[k - 1];
    if (secant < -1e-10)
      out.fail("log lambda not convex at z = " + num(zs[k]));
  }

  std::vector<double> s_grid;
  for (int k = 0; k <= 12; ++k) s_grid.push_back(0.05 * k);
  RateOptions ro;
  ro.opt_tol = 1e-10;
  const auto rr =
      transferlab::rate_function(s_grid, p1000, Observable::sin2pi(), ro);
  out.require(std::abs(rr.r.at(0)) <= 1e-10, "r(0) = " + num(rr.r.at(0)));
  for (std::size_t k = 1; k < s_grid.size(); ++k) {
    if (rr.z_star[k] < rr.z_star[k - 1] - 1e-10)
      out.fail("z* decreases at s = " + num(s_grid[k]));
  }
  for (std::size_t k = 1; k + 1 < s_grid.size(); ++k) {
    if (rr.r[k + 1] - 2.0 * rr.r[k] + rr.r[k - 1] < -1e-8)
      out.fail("r not convex at s = " + num(s_grid[k]));
  }

  const double sigma2 = transferlab::variance(p1000, Observable::sin2pi())
                            .sigma2;
  const auto small =
      transferlab::rate_function({0.01}, p1000, Observable::sin2pi(), 1e-12);
  const double ratio = small.r.at(0) * 2.0 * sigma2 / (0.01 * 0.01);
  out.require(std::abs(ratio - 1.0) <= 0.05,
              "small-s ratio = " + num(ratio));

  const double sec = t.seconds();
  out.require(sec < 30.0, "took " + num(sec) + " s (limit 30)");
  if (out.pass)
    out.detail = "convexity, monotone z*, row sums, small-s ratio " +
                 num(ratio) + "; " + num(sec) + " s";
  return out;
}

// Stability measurements: deviations must shrink as the grid refines and as
// the kernel noise vanishes.
Outcome criterion_7() {
  Outcome out;
  const Timer t;
  const auto map = transferlab::make_double_tent(2.1);

  const auto refine = transferlab::run_convergence_study(
      map, Observable::sin2pi(), transferlab::StudyMode::kRefineN,
      {200.0, 1000.0, 5000.0}, {}, {0.0, 0.2, 0.4});
  const auto sdev = transferlab::sigma2_deviation(refine);
  const auto rdev = transferlab::rate_uniform_deviation(refine);
  auto violations = [](const std::vector<double>& d) {
    int v = 0;
    for (std::size_t k = 1; k < d.size(); ++k)
      if (d[k] > d[k - 1]) ++v;
    return v;
  };
  out.require(violations(sdev) <= 1,
              "sigma2 deviations not monotone: " + num(sdev[0]) + ", " +
                  num(sdev[1]) + ", " + num(sdev[2]));
  out.require(violations(rdev) <= 1,
              "rate deviations not monotone: " + num(rdev[0]) + ", " +
                  num(rdev[1]) + ", " + num(rdev[2]));

  transferlab::StudyOptions so;
  so.fixed_n = 5000;
  const auto kernel = transferlab::run_convergence_study(
      map, Observable::sin2pi(), transferlab::StudyMode::kKernelEps,
      {0.1, 0.05, 0.025, 0.0125}, {}, {}, so);
  const auto kdev = transferlab::sigma2_deviation(kernel);
  for (std::size_t k = 1; k + 1 < kdev.size(); ++k) {
    if (!(kdev[k] < kdev[k - 1]))
      out.fail("kernel deviation not decreasing at eps index " +
               std::to_string(k));
  }

  const double sec = t.seconds();
  out.require(sec < 120.0, "took " + num(sec) + " s (limit 120)");
  if (out.pass)
    out.detail = "refine_n deviations " + num(sdev[0]) + " -> " + num(sdev[1]) +
                 " -> 0; kernel deviations " + num(kdev[0]) + " -> " +
                 num(kdev[3]) + "; " + num(sec) + " s";
  return out;
}

// Hand-derived exact fractions and an independent Monte-Carlo simulation.
Outcome criterion_8(const TransferMatrix& p1000) {
  Outcome out;

  const TransferMatrix doubling =
      transferlab::build_ulam_1d(transferlab::make_doubling_map(), 2);
  for (std::int64_t i = 0; i < 2; ++i)
    for (std::int64_t j = 0; j < 2; ++j)
      if (doubling.csr().entry(i, j) != 0.5)
        out.fail("doubling n=2 entry not exactly 1/2");

  const TransferMatrix tent4 =
      transferlab::build_ulam_1d(transferlab::make_double_tent(2.1), 4);
  const double e00 = tent4.csr().entry(0, 0), e01 = tent4.csr().entry(0, 1),
               e02 = tent4.csr().entry(0, 2), e03 = tent4.csr().entry(0, 3);
  out.require(std::abs(e00 - 10.0 / 21.0) <= 1e-15 &&
                  std::abs(e01 - 10.0 / 21.0) <= 1e-15 &&
                  std::abs(e02 - 1.0 / 21.0) <= 1e-15 && e03 == 0.0,
              "tent n=4 first row differs from (10/21, 10/21, 1/21, 0)");

  const auto esc = transferlab::escape_rate(doubling, {0});
  out.require(std::abs(esc.escape_rate - std::log(2.0)) <= 1e-15,
              "escape of [[1/2]] = " + num(esc.escape_rate));

  const double sigma2 =
      transferlab::variance(p1000, Observable::sin2pi()).sigma2;
  const auto mc = oracles::mc_birkhoff_variance(
      transferlab::make_double_tent(2.1), Observable::sin2pi(), 10000000,
      10000, 10000, 12345);
  const double gap = std::abs(mc.sigma2 - sigma2);
  out.require(gap <= 3.0 * mc.std_error,
              "MC " + num(mc.sigma2) + " vs " + num(sigma2) + " (3 SE = " +
                  num(3.0 * mc.std_error) + ")");
  if (out.pass)
    out.detail = "exact fractions hold; MC variance " + num(mc.sigma2) +
                 " brackets " + num(sigma2) + " within " +
                 num(gap / std::max(mc.std_error, 1e-300)) + " SE";
  return out;
}

}  // namespace

int main() {
  std::map<std::int64_t, TransferMatrix> ops;
  for (std::int64_t n : {200, 1000, 5000, 25000})
    ops.emplace(n, transferlab::build_ulam_1d(transferlab::make_double_tent(2.1),
                                              n));
  const TransferMatrix& p1000 = ops.at(1000);

  struct Entry {
    int id;
    std::string title;
    Outcome outcome;
  };
  std::vector<Entry> entries;
  auto run = [&entries](int id, const std::string& title, auto&& fn) {
    Outcome out;
    try {
      out = fn();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    entries.push_back({id, title, std::move(out)});
  };

  run(1, "benchmark variance table (4 observables x 4 resolutions)",
      [&] { return criterion_1(ops); });
  run(2, "rate-function vs escape-rate cross-check at 12 decimals",
      [&] { return criterion_2(p1000); });
  run(3, "second-eigenvalue probe against dense-verified value",
      [&] { return criterion_3(ops); });
  run(4, "rate-function curve ordering and crossover gap",
      [&] { return criterion_4(p1000); });
  run(5, "eigenvalue-derivative identities vs finite differences",
      [&] { return criterion_5(p1000); });
  run(6, "convexity, normalization, and small-deviation law",
      [&] { return criterion_6(ops); });
  run(7, "convergence studies under refinement and kernel noise",
      [&] { return criterion_7(); });
  run(8, "exact small instances and Monte-Carlo bracket",
      [&] { return criterion_8(p1000); });

  bool all = true;
  for (const Entry& e : entries) {
    all = all && e.outcome.pass;
    std::printf("[%s] criterion %d: %s%s%s\n",
                e.outcome.pass ? "PASS" : "FAIL", e.id, e.title.c_str(),
                e.outcome.detail.empty() ? "" : " — ",
                e.outcome.detail.c_str());
  }
  return all ? 0 : 1;
}
