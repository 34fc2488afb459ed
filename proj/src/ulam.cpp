#include "transferlab/ulam.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "transferlab/errors.hpp"
#include "transferlab/parallel.hpp"

namespace transferlab {

namespace {

constexpr double kEscapeSlack = 1e-12;

/// SplitMix64 step, used to derive independent per-cell RNG seeds.
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

TransferMatrix build_ulam_1d(const PiecewiseAffineMap1D& map, std::int64_t n,
                             int threads) {
  if (n < 2)
    throw Error("ulam", "build_ulam_1d needs at least 2 cells (got " +
                            std::to_string(n) + ")");
  const double dn = static_cast<double>(n);
  std::vector<std::vector<Triplet>> rows(static_cast<std::size_t>(n));

  // All geometry is done in u = x*n coordinates: cell edges are exact
  // integers there, so piece widths and overlaps come out as differences of
  // nearby exact values instead of cancellations of ~1/n against ~1.
  parallel_for(n, threads, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      const double cell_lo = static_cast<double>(i);
      const double cell_hi = static_cast<double>(i + 1);
      auto& out = rows[static_cast<std::size_t>(i)];
      for (std::size_t b = 0; b < map.branches().size(); ++b) {
        const AffineBranch& br = map.branches()[b];
        const double lo = std::max(cell_lo, br.lo * dn);
        const double hi = std::min(cell_hi, br.hi * dn);
        if (!(hi > lo)) continue;
        const double inter_u = br.intercept * dn;
        const double y0 = br.slope * lo + inter_u;
        const double y1 = br.slope * hi + inter_u;
        double ylo = std::min(y0, y1);
        double yhi = std::max(y0, y1);
        if (ylo < -kEscapeSlack * dn || yhi > (1.0 + kEscapeSlack) * dn)
          throw Error("ulam", "branch " + std::to_string(b + 1) + " of '" +
                                  map.name() +
                                  "' maps cell " + std::to_string(i + 1) +
                                  " outside [0,1] (mass loss)");
        ylo = std::max(ylo, 0.0);
        yhi = std::min(yhi, dn);
        if (!(yhi > ylo)) continue;
        // Piece mass relative to the cell is hi - lo (u-units); distribute
        // it over target cells by their share of the image width.
        const double scale = (hi - lo) / (yhi - ylo);
        auto j0 = static_cast<std::int64_t>(std::floor(ylo));
        auto j1 = static_cast<std::int64_t>(std::floor(yhi));
        j0 = std::clamp<std::int64_t>(j0, 0, n - 1);
        j1 = std::clamp<std::int64_t>(j1, 0, n - 1);
        for (std::int64_t j = j0; j <= j1; ++j) {
          const double t_lo = std::max(ylo, static_cast<double>(j));
          const double t_hi = std::min(yhi, static_cast<double>(j + 1));
          const double overlap = t_hi - t_lo;
          if (overlap > 0.0) out.push_back({i, j, overlap * scale});
        }
      }
    }
  });

  std::vector<Triplet> flat;
  std::size_t total = 0;
  for (const auto& r : rows) total += r.size();
  flat.reserve(total);
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());

  SparseCsr csr = SparseCsr::from_triplets(n, std::move(flat));
  // partition-of-unity of the preimage overlaps: raw sums within 1e-14
  for (double s : csr.row_sums())
    if (std::abs(s - 1.0) > 1e-14)
      throw Error("ulam", "raw assembly row sum " + std::to_string(s) +
                              " deviates from 1 beyond 1e-14");
  normalize_rows(csr);
  return TransferMatrix(std::move(csr), PartitionDescriptor{1, n}, map.name());
}

TransferMatrix build_ulam_2d(const Map2D& map, std::int64_t n,
                             std::int64_t samples_per_cell,
                             std::uint64_t rng_seed, double jitter,
                             int threads) {
  if (n < 2)
    throw Error("ulam", "build_ulam_2d needs at least 2 cells per axis");
  if (samples_per_cell < 1)
    throw Error("ulam", "samples_per_cell must be at least 1");
  if (jitter < 0.0 || jitter > 1.0)
    throw Error("ulam", "jitter must lie in [0,1]");
  const std::int64_t axis = std::max<std::int64_t>(
      1, std::llround(std::sqrt(static_cast<double>(samples_per_cell))));
  const std::int64_t total_cells = n * n;
  const double dn = static_cast<double>(n);
  const double da = static_cast<double>(axis);
  const double weight = 1.0 / (da * da);

  std::vector<std::vector<Triplet>> rows(static_cast<std::size_t>(total_cells));
  parallel_for(total_cells, threads, [&](std::int64_t begin, std::int64_t end) {
    std::vector<double> scratch(static_cast<std::size_t>(total_cells), 0.0);
    std::vector<std::int64_t> touched;
    for (std::int64_t c = begin; c < end; ++c) {
      const std::int64_t ix = c % n;
      const std::int64_t iy = c / n;
      std::mt19937_64 rng(splitmix64(rng_seed ^ splitmix64(
                                         static_cast<std::uint64_t>(c) + 1)));
      std::uniform_real_distribution<double> unif(-0.5, 0.5);
      touched.clear();
      for (std::int64_t px = 0; px < axis; ++px) {
        for (std::int64_t py = 0; py < axis; ++py) {
          double ox = (static_cast<double>(px) + 0.5) / da;
          double oy = (static_cast<double>(py) + 0.5) / da;
          if (jitter > 0.0) {
            ox += jitter * unif(rng) / da;
            oy += jitter * unif(rng) / da;
          }
          const double x = (static_cast<double>(ix) + ox) / dn;
          const double y = (static_cast<double>(iy) + oy) / dn;
          const std::array<double, 2> img = map(x, y);
          if (!(img[0] >= 0.0 && img[0] <= 1.0 && img[1] >= 0.0 &&
                img[1] <= 1.0))
            throw Error("ulam", "2-D map '" + map.name() + "' sends (" +
                                    std::to_string(x) + ", " +
                                    std::to_string(y) + ") to (" +
                                    std::to_string(img[0]) + ", " +
                                    std::to_string(img[1]) +
                                    "), outside the unit square");
          auto jx = static_cast<std::int64_t>(std::floor(img[0] * dn));
          auto jy = static_cast<std::int64_t>(std::floor(img[1] * dn));
          jx = std::clamp<std::int64_t>(jx, 0, n - 1);
          jy = std::clamp<std::int64_t>(jy, 0, n - 1);
          const std::int64_t target = jx + n * jy;
          if (scratch[static_cast<std::size_t>(target)] == 0.0)
            touched.push_back(target);
          scratch[static_cast<std::size_t>(target)] += weight;
        }
      }
      std::sort(touched.begin(), touched.end());
      auto& out = rows[static_cast<std::size_t>(c)];
      out.reserve(touched.size());
      for (std::int64_t t : touched) {
        out.push_back({c, t, scratch[static_cast<std::size_t>(t)]});
        scratch[static_cast<std::size_t>(t)] = 0.0;
      }
    }
  });

  std::vector<Triplet> flat;
  std::size_t total = 0;
  for (const auto& r : rows) total += r.size();
  flat.reserve(total);
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  SparseCsr csr = SparseCsr::from_triplets(total_cells, std::move(flat));
  normalize_rows(csr);
  return TransferMatrix(std::move(csr), PartitionDescriptor{2, n}, map.name());
}

DiscretizedObservable discretize_observable(const Observable& g,
                                            std::int64_t n) {
  if (n < 1) throw Error("ulam", "discretize_observable needs n >= 1");
  DiscretizedObservable d;
  d.observable_name = g.name();
  d.values.resize(static_cast<std::size_t>(n));
  const double dn = static_cast<double>(n);
  for (std::int64_t i = 0; i < n; ++i)
    d.values[static_cast<std::size_t>(i)] =
        g((static_cast<double>(i) + 0.5) / dn);
  return d;
}

DiscretizedObservable center_against(DiscretizedObservable g,
                                     const std::vector<double>& density) {
  if (g.values.size() != density.size())
    throw Error("ulam", "center_against: density length mismatch");
  const double n = static_cast<double>(g.values.size());
  const double mean = neumaier_dot(g.values, density) / n;
  for (double& x : g.values) x -= mean;
  g.centered = true;
  g.mean_shift += mean;
  return g;
}

}  // namespace transferlab
