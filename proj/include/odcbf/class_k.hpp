#pragma once

// Extended class-K functions with explicit inverses.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "odcbf/dual.hpp"
#include "odcbf/errors.hpp"

namespace odcbf {

class ExtendedClassK {
 public:
  enum class Kind { linear, cubic, atan, custom };

  // α(s) = a·s
  static ExtendedClassK linear(double gain = 1.0) {
    check_positive(gain, "linear gain");
    return ExtendedClassK(Kind::linear, gain, 1.0);
  }

  // α(s) = a·s³
  static ExtendedClassK cubic(double gain = 1.0) {
    check_positive(gain, "cubic gain");
    return ExtendedClassK(Kind::cubic, gain, 1.0);
  }

  // α(s) = a·atan(s / scale); range (−aπ/2, aπ/2).
  static ExtendedClassK atan(double gain = 1.0, double scale = 1.0) {
    check_positive(gain, "atan gain");
    check_positive(scale, "atan scale");
    return ExtendedClassK(Kind::atan, gain, scale);
  }

  // User-supplied pair. Only evaluable at double; synthesis code that
  // differentiates through α needs a catalog entry. Run self_test() before use.
  static ExtendedClassK custom(std::function<double(double)> alpha,
                               std::function<double(double)> alpha_inv, double range_lower,
                               double range_upper) {
    ExtendedClassK k(Kind::custom, 1.0, 1.0);
    k.alpha_ = std::move(alpha);
    k.alpha_inv_ = std::move(alpha_inv);
    k.range_lower_ = range_lower;
    k.range_upper_ = range_upper;
    return k;
  }

  Kind kind() const { return kind_; }
  double gain() const { return gain_; }

  std::string name() const {
    switch (kind_) {
      case Kind::linear: return "linear";
      case Kind::cubic: return "cubic";
      case Kind::atan: return "atan";
      case Kind::custom: return "custom";
    }
    return "unknown";
  }

  template <class T>
  T operator()(const T& s) const {
    using std::atan;
    switch (kind_) {
      case Kind::linear: return gain_ * s;
      case Kind::cubic: return gain_ * s * s * s;
      case Kind::atan: return gain_ * atan(s / scale_);
      case Kind::custom:
        if constexpr (std::is_same_v<T, double>) {
          return alpha_(s);
        } else {
          throw ParameterError("custom class-K function cannot be differentiated; use a catalog entry");
        }
    }
    return T(0);
  }

  // Open range of α: (range_lower, range_upper).
  double range_lower() const { return range_lower_; }
  double range_upper() const { return range_upper_; }
  bool in_range(double y) const { return y > range_lower_ && y < range_upper_; }

  double inverse(double y) const {
    if (!in_range(y)) {
      throw MarginUndefinedError("value " + std::to_string(y) + " outside the range of alpha (" +
                                 name() + ")");
    }
    switch (kind_) {
      case Kind::linear: return y / gain_;
      case Kind::cubic: return std::cbrt(y / gain_);
      case Kind::atan: return scale_ * std::tan(y / gain_);
      case Kind::custom: return alpha_inv_(y);
    }
    return 0.0;
  }

  // Checks α(0) = 0, strict increase and α⁻¹(α(s)) = s on the given grid.
  // Returns the worst inverse error; throws ParameterError on failure.
  double self_test(const std::vector<double>& grid, double tol = 1e-10) const {
    if (std::abs((*this)(0.0)) > tol) throw ParameterError("alpha(0) != 0");
    double worst = 0.0;
    double prev = -std::numeric_limits<double>::infinity();
    for (double s : grid) {
      const double a = (*this)(s);
      if (!(a > prev)) throw ParameterError("alpha not strictly increasing at s=" + std::to_string(s));
      prev = a;
      const double err = std::abs(inverse(a) - s) / std::max(1.0, std::abs(s));
      worst = std::max(worst, err);
    }
    if (worst > tol) throw ParameterError("alpha_inv(alpha(s)) != s, error " + std::to_string(worst));
    return worst;
  }

 private:
  ExtendedClassK(Kind kind, double gain, double scale) : kind_(kind), gain_(gain), scale_(scale) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (kind == Kind::atan) {
      range_upper_ = gain * std::numbers::pi / 2.0;
      range_lower_ = -range_upper_;
    } else {
      range_upper_ = inf;
      range_lower_ = -inf;
    }
  }

  static void check_positive(double v, const char* what) {
    if (!(v > 0.0)) throw ParameterError(std::string(what) + " must be positive");
  }

  Kind kind_;
  double gain_;
  double scale_;
  double range_lower_ = 0.0;
  double range_upper_ = 0.0;
  std::function<double(double)> alpha_;
  std::function<double(double)> alpha_inv_;
};

}  // namespace odcbf
