#include "transferlab/maps.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "transferlab/errors.hpp"

namespace transferlab {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kCos2PiShift = 0.0614;  // benchmark centering constant, kept as printed

double wrap_unit(double t) {
  double r = t - std::floor(t);
  // 2x mod 1 at x = 0.5 or 1.0 lands exactly on an integer; keep it at 0.
  return (r >= 1.0) ? 0.0 : r;
}

}  // namespace

PiecewiseAffineMap1D::PiecewiseAffineMap1D(std::string name,
                                           std::vector<AffineBranch> branches)
    : name_(std::move(name)), branches_(std::move(branches)) {
  if (branches_.empty())
    throw Error("maps", "map '" + name_ + "' has no branches");
  if (branches_.front().lo != 0.0 || branches_.back().hi != 1.0)
    throw Error("maps", "branches of '" + name_ + "' must cover [0,1]");
  min_expansion_ = std::abs(branches_.front().slope);
  for (std::size_t b = 0; b < branches_.size(); ++b) {
    const AffineBranch& br = branches_[b];
    if (!(br.lo < br.hi))
      throw Error("maps", "branch " + std::to_string(b + 1) + " of '" + name_ +
                              "' is empty or reversed");
    if (b > 0 && branches_[b - 1].hi != br.lo)
      throw Error("maps", "branches of '" + name_ + "' leave a gap before " +
                              std::to_string(br.lo));
    if (!(std::abs(br.slope) > 1.0))
      throw Error("maps", "branch " + std::to_string(b + 1) + " of '" + name_ +
                              "' is not expanding (|slope| must exceed 1)");
    min_expansion_ = std::min(min_expansion_, std::abs(br.slope));
    // Interval arithmetic on the endpoints: the affine image of [lo, hi] is
    // the interval spanned by the two endpoint values.
    const double y0 = br(br.lo);
    const double y1 = br(br.hi);
    const double ylo = std::min(y0, y1);
    const double yhi = std::max(y0, y1);
    if (ylo < -1e-12 || yhi > 1.0 + 1e-12)
      throw Error("maps", "branch " + std::to_string(b + 1) + " of '" + name_ +
                              "' maps outside [0,1] (image [" +
                              std::to_string(ylo) + ", " + std::to_string(yhi) +
                              "])");
  }
}

double PiecewiseAffineMap1D::operator()(double x) const {
  if (!(x >= 0.0 && x <= 1.0))
    throw Error("maps", "map argument " + std::to_string(x) +
                            " outside [0,1]");
  // Half-open branch membership [lo, hi); the last branch is closed at 1.
  for (std::size_t b = 0; b + 1 < branches_.size(); ++b) {
    if (x < branches_[b].hi) return branches_[b](x);
  }
  return branches_.back()(x);
}

PiecewiseAffineMap1D make_double_tent(double a) {
  if (!(a > 1.0))
    throw Error("maps", "double-tent parameter a must exceed 1 (got " +
                            std::to_string(a) + ")");
  if (a > 4.0)
    throw Error("maps", "double-tent parameter a must be at most 4, else "
                        "branch images leave [0,1] (got " +
                            std::to_string(a) + ")");
  std::vector<AffineBranch> branches = {
      {0.00, 0.25, a, 0.0},
      {0.25, 0.50, -a, a / 2.0},
      {0.50, 0.75, -a, 1.0 + a / 2.0},
      {0.75, 1.00, a, 1.0 - a},
  };
  return PiecewiseAffineMap1D("double-tent", std::move(branches));
}

PiecewiseAffineMap1D make_doubling_map() {
  std::vector<AffineBranch> branches = {
      {0.0, 0.5, 2.0, 0.0},
      {0.5, 1.0, 2.0, -1.0},
  };
  return PiecewiseAffineMap1D("doubling", std::move(branches));
}

Map2D::Map2D(std::string name, EvalFn eval, bool piecewise_affine)
    : name_(std::move(name)),
      eval_(std::move(eval)),
      piecewise_affine_(piecewise_affine) {
  if (!eval_) throw Error("maps", "2-D map '" + name_ + "' has no evaluator");
}

Map2D make_product_doubling() {
  return Map2D(
      "product-doubling",
      [](double x, double y) {
        return std::array<double, 2>{wrap_unit(2.0 * x), wrap_unit(2.0 * y)};
      },
      /*piecewise_affine=*/true);
}

Map2D make_identity_2d() {
  return Map2D(
      "identity",
      [](double x, double y) {
        return std::array<double, 2>{x, y};
      },
      /*piecewise_affine=*/true);
}

Observable::Observable(Kind kind, std::string name, double builtin_shift)
    : kind_(kind), name_(std::move(name)), builtin_shift_(builtin_shift) {}

Observable Observable::cos2pi() {
  return Observable(Kind::Cos2Pi, "cos2pi", kCos2PiShift);
}

Observable Observable::linear() {
  return Observable(Kind::Linear, "linear", 0.0);
}

Observable Observable::sin2pi() {
  return Observable(Kind::Sin2Pi, "sin2pi", 0.0);
}

Observable Observable::indicator_half() {
  return Observable(Kind::IndicatorHalf, "indicator_half", 0.0);
}

Observable Observable::table(std::vector<double> values) {
  if (values.empty())
    throw Error("maps", "table observable needs at least one cell value");
  Observable g(Kind::Table, "table", 0.0);
  g.table_ = std::move(values);
  return g;
}

Observable Observable::custom(std::string name,
                              std::function<double(double)> fn) {
  if (!fn) throw Error("maps", "custom observable has no evaluator");
  Observable g(Kind::Custom, std::move(name), 0.0);
  g.fn_ = std::move(fn);
  return g;
}

double Observable::operator()(double x) const {
  switch (kind_) {
    case Kind::Cos2Pi:
      return std::cos(2.0 * kPi * x) - kCos2PiShift;
    case Kind::Linear:
      return 2.0 * x - 1.0;
    case Kind::Sin2Pi:
      return std::sin(2.0 * kPi * x);
    case Kind::IndicatorHalf:
      return (x <= 0.5) ? 1.0 : -1.0;
    case Kind::Table: {
      const auto n = static_cast<std::int64_t>(table_.size());
      if (!(x >= 0.0 && x <= 1.0))
        throw Error("maps", "table observable evaluated at " +
                                std::to_string(x) +
                                ", outside the tabulated partition [0,1]");
      auto i = static_cast<std::int64_t>(std::floor(x * static_cast<double>(n)));
      i = std::clamp<std::int64_t>(i, 0, n - 1);
      return table_[static_cast<std::size_t>(i)];
    }
    case Kind::Custom:
      return fn_(x);
  }
  throw Error("maps", "unreachable observable kind");
}

double eval_observable(const Observable& g, double x) {
  if (!(x >= 0.0 && x <= 1.0))
    throw Error("maps", "observable argument " + std::to_string(x) +
                            " outside [0,1]");
  return g(x);
}

}  // namespace transferlab
