#pragma once

// Derivatives of scalar-generic callables.
//
// A callable is "scalar-generic" when it accepts Vec<T> for any T in the
// dual-number tower (double, Dual<double>, Dual<Dual<double>>, ...).
// gradient()/jacobian() seed one direction per pass, so they work at any
// scalar type T and can be nested.

#include <algorithm>
#include <cmath>
#include <utility>

#include "odcbf/dual.hpp"
#include "odcbf/types.hpp"

namespace odcbf::ad {

template <class T>
Vec<Dual<T>> lift(const Vec<T>& x) {
  Vec<Dual<T>> out(x.size());
  for (Index i = 0; i < x.size(); ++i) out(i) = Dual<T>(x(i), T(0));
  return out;
}

template <class F, class T>
std::pair<T, Vec<T>> value_and_gradient(const F& f, const Vec<T>& x) {
  const Index n = x.size();
  Vec<Dual<T>> xd = lift(x);
  Vec<T> grad(n);
  T value{};
  for (Index i = 0; i < n; ++i) {
    xd(i).du = T(1);
    const Dual<T> y = f(xd);
    grad(i) = y.du;
    value = y.re;
    xd(i).du = T(0);
  }
  if (n == 0) value = f(x);
  return {value, grad};
}

template <class F, class T>
Vec<T> gradient(const F& f, const Vec<T>& x) {
  return value_and_gradient(f, x).second;
}

// Jacobian of a vector-valued generic callable, rows = outputs.
template <class F, class T>
Mat<T> jacobian(const F& f, const Vec<T>& x) {
  const Index n = x.size();
  Vec<Dual<T>> xd = lift(x);
  Mat<T> jac;
  for (Index j = 0; j < n; ++j) {
    xd(j).du = T(1);
    const Vec<Dual<T>> y = f(xd);
    if (j == 0) jac.resize(y.size(), n);
    for (Index i = 0; i < y.size(); ++i) jac(i, j) = y(i).du;
    xd(j).du = T(0);
  }
  return jac;
}

}  // namespace odcbf::ad

namespace odcbf::fd {

inline constexpr double kDefaultStep = 1e-6;

inline double step_for(double xi, double rel_step) {
  return rel_step * std::max(1.0, std::abs(xi));
}

// Central differences; f maps VectorXd -> double.
template <class F>
VectorXd gradient(const F& f, const VectorXd& x, double rel_step = kDefaultStep) {
  VectorXd grad(x.size());
  VectorXd xp = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double h = step_for(x(i), rel_step);
    xp(i) = x(i) + h;
    const double fp = f(xp);
    xp(i) = x(i) - h;
    const double fm = f(xp);
    xp(i) = x(i);
    grad(i) = (fp - fm) / (2.0 * h);
  }
  return grad;
}

// Central differences; f maps VectorXd -> VectorXd.
template <class F>
MatrixXd jacobian(const F& f, const VectorXd& x, double rel_step = kDefaultStep) {
  MatrixXd jac;
  VectorXd xp = x;
  for (Index j = 0; j < x.size(); ++j) {
    const double h = step_for(x(j), rel_step);
    xp(j) = x(j) + h;
    const VectorXd fp = f(xp);
    xp(j) = x(j) - h;
    const VectorXd fm = f(xp);
    xp(j) = x(j);
    if (j == 0) jac.resize(fp.size(), x.size());
    jac.col(j) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

// ‖a − b‖ / max(1, ‖b‖): relative for large derivatives, absolute near zero.
template <class A, class B>
double relative_error(const A& a, const B& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace odcbf::fd
