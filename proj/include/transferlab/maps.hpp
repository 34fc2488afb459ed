#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace transferlab {

/// One affine branch of a piecewise map: x -> slope*x + intercept on
/// [lo, hi) (the last branch of a map is closed at 1).
struct AffineBranch {
  double lo = 0.0;
  double hi = 0.0;
  double slope = 0.0;
  double intercept = 0.0;

  double operator()(double x) const { return slope * x + intercept; }
};

/// Piecewise affine expanding interval map on [0,1]. Branch intervals
/// partition [0,1) (half-open, last closed at 1), every |slope| exceeds 1,
/// and every branch image stays inside [0,1]; all three are checked at
/// construction.
class PiecewiseAffineMap1D {
 public:
  PiecewiseAffineMap1D(std::string name, std::vector<AffineBranch> branches);

  /// Evaluates the map. Branch membership is half-open [lo, hi) except the
  /// last branch, which is closed at 1.
  double operator()(double x) const;

  const std::vector<AffineBranch>& branches() const { return branches_; }
  const std::string& name() const { return name_; }

  /// Minimum |slope| over branches (the expansion constant, > 1).
  double min_expansion() const { return min_expansion_; }

 private:
  std::string name_;
  std::vector<AffineBranch> branches_;
  double min_expansion_ = 0.0;
};

/// The 4-branch benchmark map: slopes (a, -a, -a, a) on the quarters of
/// [0,1] with intercepts (0, a/2, 1+a/2, 1-a). Continuous at 1/4 and 3/4,
/// jump at 1/2. Requires 1 < a <= 4 so the map expands and stays in [0,1].
PiecewiseAffineMap1D make_double_tent(double a);

/// The doubling map T(x) = 2x mod 1 as two affine branches.
PiecewiseAffineMap1D make_doubling_map();

/// Two-dimensional map on the unit square, represented by a pure callable
/// (exact branch geometry is not tracked in 2-D; assembly samples instead).
class Map2D {
 public:
  using EvalFn = std::function<std::array<double, 2>(double, double)>;

  Map2D(std::string name, EvalFn eval, bool piecewise_affine);

  std::array<double, 2> operator()(double x, double y) const {
    return eval_(x, y);
  }

  const std::string& name() const { return name_; }
  bool piecewise_affine() const { return piecewise_affine_; }

 private:
  std::string name_;
  EvalFn eval_;
  bool piecewise_affine_ = false;
};

/// (2x mod 1, 2y mod 1) on the unit square.
Map2D make_product_doubling();

/// The identity map on the unit square (each cell maps to itself).
Map2D make_identity_2d();

/// Real observable on [0,1]. Built-in kinds cover the four benchmark
/// observables; `table` carries one value per cell of an equipartition and
/// `custom` wraps an arbitrary callable.
class Observable {
 public:
  enum class Kind { Cos2Pi, Linear, Sin2Pi, IndicatorHalf, Table, Custom };

  /// cos(2*pi*x) - 0.0614. The constant is the printed benchmark decimal and
  /// is kept verbatim; downstream centering absorbs the residual mean.
  static Observable cos2pi();
  /// 2x - 1.
  static Observable linear();
  /// sin(2*pi*x).
  static Observable sin2pi();
  /// +1 on [0,1/2], -1 on (1/2,1] (the split point belongs to the + side).
  static Observable indicator_half();
  /// Piecewise-constant observable: values[i] on cell [i/n, (i+1)/n).
  static Observable table(std::vector<double> values);
  /// Arbitrary callable on [0,1].
  static Observable custom(std::string name, std::function<double(double)> fn);

  /// Raw (uncentered) value at x in [0,1]. Deterministic and pure.
  double operator()(double x) const;

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }

  /// Constant already subtracted inside the definition (0.0614 for cos2pi,
  /// 0 otherwise). Numerical centering against a density is tracked
  /// separately on the discretized observable.
  double builtin_shift() const { return builtin_shift_; }

 private:
  Observable(Kind kind, std::string name, double builtin_shift);

  Kind kind_;
  std::string name_;
  double builtin_shift_ = 0.0;
  std::vector<double> table_;
  std::function<double(double)> fn_;
};

/// Free-function form of Observable::operator(); validates x in [0,1].
double eval_observable(const Observable& g, double x);

}  // namespace transferlab
