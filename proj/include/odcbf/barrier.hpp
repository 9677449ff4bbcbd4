#pragma once

// Barrier functions, Lie derivatives, ISSf margin γ(δ) and safe-set geometry.

#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "odcbf/autodiff.hpp"
#include "odcbf/class_k.hpp"
#include "odcbf/dynamics.hpp"

namespace odcbf {

// Callable h: Vec<T> -> T for every T in the dual tower.
template <class H>
concept ScalarGenericFunction = requires(const H& h, const Vec<double>& x, const Vec<Dual<double>>& xd) {
  { h(x) } -> std::convertible_to<double>;
  { h(xd) } -> std::convertible_to<Dual<double>>;
};

// A barrier that supplies its own (chain-rule) gradient at double.
template <class H>
concept HasExplicitGradient = requires(const H& h, const VectorXd& x) {
  { h.gradient(x) } -> std::convertible_to<VectorXd>;
};

struct BarrierSpec {
  Index n = 0;
  std::function<double(const VectorXd&)> h;
  std::function<VectorXd(const VectorXd&)> grad_h;
  ExtendedClassK alpha = ExtendedClassK::linear(1.0);
  double epsilon = 1.0;
  double theta_d = 1.0;
  double p_weight = 1.0;

  void validate() const {
    if (!(epsilon > 0.0)) throw ParameterError("epsilon must be positive");
    if (!(theta_d > 0.0)) throw ParameterError("theta_d must be positive");
    if (!(p_weight > 0.0)) throw ParameterError("p_weight must be positive");
    if (!h || !grad_h) throw ParameterError("barrier needs h and grad_h");
  }

  double value(const VectorXd& x) const {
    require_size(x, n, "x");
    return h(x);
  }

  VectorXd gradient(const VectorXd& x) const {
    require_size(x, n, "x");
    VectorXd gr = grad_h(x);
    require_size(gr, n, "grad_h(x)");
    return gr;
  }

  // Same barrier, different robustness/decay parameters.
  BarrierSpec with_epsilon(double eps) const {
    BarrierSpec b = *this;
    b.epsilon = eps;
    return b;
  }
};

template <ScalarGenericFunction H>
BarrierSpec make_barrier_spec(H barrier, Index n, ExtendedClassK alpha, double epsilon,
                              double theta_d, double p_weight) {
  BarrierSpec spec;
  spec.n = n;
  spec.h = [barrier](const VectorXd& x) -> double { return barrier(Vec<double>(x)); };
  if constexpr (HasExplicitGradient<H>) {
    spec.grad_h = [barrier](const VectorXd& x) -> VectorXd { return barrier.gradient(x); };
  } else {
    spec.grad_h = [barrier](const VectorXd& x) -> VectorXd {
      return ad::gradient(barrier, Vec<double>(x));
    };
  }
  spec.alpha = std::move(alpha);
  spec.epsilon = epsilon;
  spec.theta_d = theta_d;
  spec.p_weight = p_weight;
  spec.validate();
  return spec;
}

// Row vectors are stored as column VectorXd.
struct LieData {
  double lf_h = 0.0;
  VectorXd lg_h;
  VectorXd lw_h;
  double h_val = 0.0;
};

inline LieData eval_lie(const DisturbedSystem& sys, const BarrierSpec& bar, const VectorXd& x) {
  require_size(x, sys.n, "x");
  if (bar.n != sys.n) throw ShapeError("barrier dimension does not match system state dimension");
  const VectorXd grad = bar.gradient(x);
  LieData out;
  out.h_val = bar.value(x);
  out.lf_h = grad.dot(sys.drift(x));
  out.lg_h = sys.input_matrix(x).transpose() * grad;
  out.lw_h = sys.disturbance_matrix(x).transpose() * grad;
  return out;
}

// Lie derivatives at any scalar type, differentiating h with Dual<T>.
template <class T>
struct LieTerms {
  T h{};
  T lf_h{};
  Vec<T> lg_h;
  Vec<T> lw_h;
};

template <ControlAffineModel M, class H, class T>
LieTerms<T> lie_terms(const M& model, const H& barrier, const Vec<T>& x) {
  auto [h, grad] = ad::value_and_gradient(barrier, x);
  LieTerms<T> out;
  out.h = h;
  out.lf_h = grad.dot(model.drift(x));
  out.lg_h = model.input_matrix(x).transpose() * grad;
  out.lw_h = model.disturbance_matrix(x).transpose() * grad;
  return out;
}

// γ(δ) = −α⁻¹(−εδ²/(2θ_d)).
inline double gamma_margin(const BarrierSpec& bar, double delta) {
  if (delta < 0.0) throw ParameterError("disturbance bound must be nonnegative");
  if (delta == 0.0) return 0.0;
  const double arg = -bar.epsilon * delta * delta / (2.0 * bar.theta_d);
  try {
    return -bar.alpha.inverse(arg);
  } catch (const MarginUndefinedError&) {
    throw MarginUndefinedError("disturbance bound " + std::to_string(delta) +
                               " too large for alpha: margin undefined");
  }
}

// Geometry of S = {h >= 0}, D = {h + b > 0} and S_δ = {h + γ(δ) >= 0}.
// b = −inf h and c = sup h; either may be +inf.
struct SafeSetGeometry {
  std::function<double(const VectorXd&)> h;
  double b = std::numeric_limits<double>::infinity();
  double c = std::numeric_limits<double>::infinity();
  double boundary_scale = 1.0;
  // Optional sampling box for D (states outside are treated as outside D).
  std::optional<VectorXd> box_lower;
  std::optional<VectorXd> box_upper;

  bool in_box(const VectorXd& x) const {
    if (box_lower && ((x - *box_lower).array() < 0.0).any()) return false;
    if (box_upper && ((*box_upper - x).array() < 0.0).any()) return false;
    return true;
  }
  bool in_safe_set(const VectorXd& x) const { return h(x) >= 0.0; }
  bool in_interior(const VectorXd& x) const { return h(x) > 0.0; }
  bool on_boundary(const VectorXd& x) const {
    return std::abs(h(x)) <= 1e-9 * (1.0 + boundary_scale);
  }
  bool in_domain(const VectorXd& x) const { return h(x) + b > 0.0; }
  bool in_inflated(const VectorXd& x, double gamma) const { return h(x) + gamma >= 0.0; }
  // D∖Int(S), the region the verification conditions range over.
  bool in_exterior_region(const VectorXd& x) const {
    const double v = h(x);
    return v <= 0.0 && v + b > 0.0 && in_box(x);
  }
};

inline SafeSetGeometry make_geometry(const BarrierSpec& bar,
                                     double b = std::numeric_limits<double>::infinity(),
                                     double c = std::numeric_limits<double>::infinity()) {
  SafeSetGeometry g;
  g.h = bar.h;
  g.b = b;
  g.c = c;
  return g;
}

// Supremal admissible ‖d‖∞: sqrt(−2θ_d α(−b)/ε). Compare with strict "<".
inline double admissible_delta(const BarrierSpec& bar, const SafeSetGeometry& geom) {
  if (!std::isfinite(geom.b)) return std::numeric_limits<double>::infinity();
  if (!(geom.b > 0.0)) throw ParameterError("b must be positive");
  const double a = bar.alpha(-geom.b);
  return std::sqrt(-2.0 * bar.theta_d * a / bar.epsilon);
}

// Relative error of the barrier's gradient against central differences.
inline double gradient_check(const BarrierSpec& bar, const VectorXd& x,
                             double rel_step = fd::kDefaultStep) {
  const VectorXd numeric = fd::gradient(bar.h, x, rel_step);
  return fd::relative_error(bar.gradient(x), numeric);
}

}  // namespace odcbf
