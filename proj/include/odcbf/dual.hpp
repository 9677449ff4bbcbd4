#pragma once

// Forward-mode dual numbers.
//
//   Dual<double> x(3.0, 1.0);
//   auto y = sin(x) * x;     // y.re == f(3), y.du == f'(3)
//
// Duals nest: Dual<Dual<double>> carries second derivatives, which is how
// backstepped barriers differentiate through a controller that itself
// contains a gradient.

#include <cmath>
#include <concepts>
#include <limits>
#include <ostream>
#include <type_traits>

#include <Eigen/Core>

namespace odcbf {

template <class T>
struct Dual {
  T re{};
  T du{};

  constexpr Dual() = default;
  constexpr Dual(const T& r) : re(r), du(0) {}  // NOLINT(implicit)
  constexpr Dual(const T& r, const T& d) : re(r), du(d) {}

  template <class U>
    requires(std::is_arithmetic_v<U> && !std::is_same_v<U, T>)
  constexpr Dual(U r) : re(r), du(0) {}  // NOLINT(implicit)

  constexpr Dual& operator+=(const Dual& o) { re += o.re; du += o.du; return *this; }
  constexpr Dual& operator-=(const Dual& o) { re -= o.re; du -= o.du; return *this; }
  constexpr Dual& operator*=(const Dual& o) { *this = *this * o; return *this; }
  constexpr Dual& operator/=(const Dual& o) { *this = *this / o; return *this; }

  friend constexpr Dual operator+(const Dual& a) { return a; }
  friend constexpr Dual operator-(const Dual& a) { return {-a.re, -a.du}; }
  friend constexpr Dual operator+(const Dual& a, const Dual& b) { return {a.re + b.re, a.du + b.du}; }
  friend constexpr Dual operator-(const Dual& a, const Dual& b) { return {a.re - b.re, a.du - b.du}; }
  friend constexpr Dual operator*(const Dual& a, const Dual& b) {
    return {a.re * b.re, a.du * b.re + a.re * b.du};
  }
  friend constexpr Dual operator/(const Dual& a, const Dual& b) {
    const T q = a.re / b.re;
    return {q, (a.du - q * b.du) / b.re};
  }

  friend constexpr bool operator==(const Dual& a, const Dual& b) { return a.re == b.re; }
  friend constexpr bool operator!=(const Dual& a, const Dual& b) { return a.re != b.re; }
  friend constexpr bool operator<(const Dual& a, const Dual& b) { return a.re < b.re; }
  friend constexpr bool operator>(const Dual& a, const Dual& b) { return a.re > b.re; }
  friend constexpr bool operator<=(const Dual& a, const Dual& b) { return a.re <= b.re; }
  friend constexpr bool operator>=(const Dual& a, const Dual& b) { return a.re >= b.re; }

  friend std::ostream& operator<<(std::ostream& os, const Dual& a) {
    return os << '(' << a.re << " + " << a.du << "e)";
  }
};

template <class T>
struct is_dual : std::false_type {};
template <class T>
struct is_dual<Dual<T>> : std::true_type {};
template <class T>
inline constexpr bool is_dual_v = is_dual<T>::value;

// Strips every dual layer down to the underlying double.
template <class T>
constexpr double value_of(const T& x) {
  if constexpr (is_dual_v<T>) {
    return value_of(x.re);
  } else {
    return static_cast<double>(x);
  }
}

// Elementary functions. Each applies the chain rule one layer down; nesting
// falls out of the recursion through T's own overloads.

template <class T>
Dual<T> sin(const Dual<T>& a) {
  using std::cos;
  using std::sin;
  return {sin(a.re), a.du * cos(a.re)};
}

template <class T>
Dual<T> cos(const Dual<T>& a) {
  using std::cos;
  using std::sin;
  return {cos(a.re), -a.du * sin(a.re)};
}

template <class T>
Dual<T> tan(const Dual<T>& a) {
  using std::tan;
  const T t = tan(a.re);
  return {t, a.du * (T(1) + t * t)};
}

template <class T>
Dual<T> atan(const Dual<T>& a) {
  using std::atan;
  return {atan(a.re), a.du / (T(1) + a.re * a.re)};
}

template <class T>
Dual<T> atan2(const Dual<T>& y, const Dual<T>& x) {
  using std::atan2;
  const T r2 = x.re * x.re + y.re * y.re;
  return {atan2(y.re, x.re), (x.re * y.du - y.re * x.du) / r2};
}

template <class T>
Dual<T> sqrt(const Dual<T>& a) {
  using std::sqrt;
  const T s = sqrt(a.re);
  return {s, a.du / (T(2) * s)};
}

template <class T>
Dual<T> cbrt(const Dual<T>& a) {
  using std::cbrt;
  const T c = cbrt(a.re);
  return {c, a.du / (T(3) * c * c)};
}

template <class T>
Dual<T> exp(const Dual<T>& a) {
  using std::exp;
  const T e = exp(a.re);
  return {e, a.du * e};
}

template <class T>
Dual<T> log(const Dual<T>& a) {
  using std::log;
  return {log(a.re), a.du / a.re};
}

template <class T>
Dual<T> tanh(const Dual<T>& a) {
  using std::tanh;
  const T t = tanh(a.re);
  return {t, a.du * (T(1) - t * t)};
}

template <class T>
Dual<T> abs(const Dual<T>& a) {
  return a.re < T(0) ? -a : a;
}

template <class T>
Dual<T> pow(const Dual<T>& a, int k) {
  using std::pow;
  if (k == 0) return Dual<T>(T(1));
  const T pk1 = pow(a.re, k - 1);
  return {pk1 * a.re, a.du * T(k) * pk1};
}

template <class T>
bool isfinite(const Dual<T>& a) {
  using std::isfinite;
  return isfinite(a.re) && isfinite(a.du);
}

template <class T>
bool isnan(const Dual<T>& a) {
  using std::isnan;
  return isnan(a.re) || isnan(a.du);
}

}  // namespace odcbf

namespace Eigen {

template <class T>
struct NumTraits<odcbf::Dual<T>> : GenericNumTraits<odcbf::Dual<T>> {
  using Real = odcbf::Dual<T>;
  using NonInteger = odcbf::Dual<T>;
  using Nested = odcbf::Dual<T>;
  using Literal = odcbf::Dual<T>;

  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 2 * NumTraits<T>::ReadCost,
    AddCost = 2 * NumTraits<T>::AddCost,
    MulCost = 3 * NumTraits<T>::MulCost + NumTraits<T>::AddCost,
  };

  static inline Real epsilon() { return Real(NumTraits<T>::epsilon()); }
  static inline Real dummy_precision() { return Real(NumTraits<T>::dummy_precision()); }
  static inline Real highest() { return Real(NumTraits<T>::highest()); }
  static inline Real lowest() { return Real(NumTraits<T>::lowest()); }
  static inline int digits10() { return NumTraits<T>::digits10(); }
};

}  // namespace Eigen
