#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "transferlab/maps.hpp"
#include "transferlab/sparse.hpp"

namespace transferlab {

/// Observable sampled at the cell midpoints (i + 1/2)/n of an equipartition,
/// optionally re-centered against a computed invariant density.
struct DiscretizedObservable {
  std::vector<double> values;
  std::string observable_name;
  bool centered = false;
  /// Total constant subtracted by centering (0 before centering).
  double mean_shift = 0.0;

  std::int64_t n() const { return static_cast<std::int64_t>(values.size()); }
};

/// Exact 1-D Ulam matrix: P[i][j] = m(I_i ∩ T^{-1} I_j) / m(I_i) over the
/// n-cell equipartition, computed branch-wise (the affine image of each cell
/// piece is an interval; its overlap with each target cell is pulled back by
/// the branch slope). Raw row sums land within 1e-14 of 1 and are then
/// normalized exactly once. Row assembly is parallel per cell; results are
/// merged in ascending row order so the matrix is identical for any thread
/// count.
TransferMatrix build_ulam_1d(const PiecewiseAffineMap1D& map, std::int64_t n,
                             int threads = 1);

/// Sampled 2-D Ulam matrix over the n-by-n cube partition (cells indexed
/// ix + n*iy): each cell is covered by an a-by-a stratified grid of sample
/// midpoints with a = max(1, round(sqrt(samples_per_cell))), optionally
/// jittered inside each sub-cell (jitter in [0,1] is the fraction of the
/// sub-cell half-width; 0 = exact stratification). The RNG is seeded per cell
/// from rng_seed, so results do not depend on the thread count.
TransferMatrix build_ulam_2d(const Map2D& map, std::int64_t n,
                             std::int64_t samples_per_cell,
                             std::uint64_t rng_seed, double jitter = 0.0,
                             int threads = 1);

/// Midpoint samples g((i + 1/2)/n), i = 0..n-1; no centering applied here.
DiscretizedObservable discretize_observable(const Observable& g,
                                            std::int64_t n);

/// Subtracts the discrete mean sum_i g_i v_i / n (v the density, sum(v)/n = 1)
/// and records it in mean_shift. After this, |sum_i g_i v_i / n| <= 1e-12.
/// The input is taken by value; the centered copy is the return value.
[[nodiscard]] DiscretizedObservable center_against(
    DiscretizedObservable g, const std::vector<double>& density);

}  // namespace transferlab
