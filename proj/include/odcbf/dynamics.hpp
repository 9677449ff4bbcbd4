#pragma once

// Disturbed control-affine systems  ẋ = f(x) + g(x)u + w(x)d.

#include <cmath>
#include <concepts>
#include <functional>
#include <utility>

#include "odcbf/dual.hpp"
#include "odcbf/types.hpp"

namespace odcbf {

// A model whose drift/input/disturbance maps are member templates over the
// scalar type, so it can be differentiated by dual numbers.
template <class M>
concept ControlAffineModel = requires(const M& m, const Vec<double>& x, const Vec<Dual<double>>& xd) {
  { m.state_dim() } -> std::convertible_to<Index>;
  { m.input_dim() } -> std::convertible_to<Index>;
  { m.disturbance_dim() } -> std::convertible_to<Index>;
  { m.drift(x) } -> std::convertible_to<Vec<double>>;
  { m.input_matrix(x) } -> std::convertible_to<Mat<double>>;
  { m.disturbance_matrix(x) } -> std::convertible_to<Mat<double>>;
  { m.drift(xd) } -> std::convertible_to<Vec<Dual<double>>>;
  { m.input_matrix(xd) } -> std::convertible_to<Mat<Dual<double>>>;
  { m.disturbance_matrix(xd) } -> std::convertible_to<Mat<Dual<double>>>;
};

// Type-erased, double-valued system. Immutable after construction; the
// accessors check every returned shape.
struct DisturbedSystem {
  Index n = 0;
  Index m = 0;
  Index p = 0;
  std::function<VectorXd(const VectorXd&)> f;
  std::function<MatrixXd(const VectorXd&)> g;
  std::function<MatrixXd(const VectorXd&)> w;

  VectorXd drift(const VectorXd& x) const {
    require_size(x, n, "x");
    VectorXd out = f(x);
    require_size(out, n, "f(x)");
    return out;
  }

  MatrixXd input_matrix(const VectorXd& x) const {
    require_size(x, n, "x");
    MatrixXd out = g(x);
    require_shape(out, n, m, "g(x)");
    return out;
  }

  MatrixXd disturbance_matrix(const VectorXd& x) const {
    require_size(x, n, "x");
    MatrixXd out = w(x);
    require_shape(out, n, p, "w(x)");
    return out;
  }
};

template <ControlAffineModel M>
DisturbedSystem to_system(M model) {
  DisturbedSystem sys;
  sys.n = model.state_dim();
  sys.m = model.input_dim();
  sys.p = model.disturbance_dim();
  sys.f = [model](const VectorXd& x) -> VectorXd { return model.drift(Vec<double>(x)); };
  sys.g = [model](const VectorXd& x) -> MatrixXd { return model.input_matrix(Vec<double>(x)); };
  sys.w = [model](const VectorXd& x) -> MatrixXd { return model.disturbance_matrix(Vec<double>(x)); };
  return sys;
}

inline VectorXd eval_dynamics(const DisturbedSystem& sys, const VectorXd& x, const VectorXd& u,
                              const VectorXd& d) {
  require_size(x, sys.n, "x");
  require_size(u, sys.m, "u");
  require_size(d, sys.p, "d");
  return sys.drift(x) + sys.input_matrix(x) * u + sys.disturbance_matrix(x) * d;
}

// Disturbance d(t). sup_norm is the declared bound δ on sup_t ‖d(t)‖₂.
// A state-feedback disturbance (adversarial extension) may be attached; it
// takes precedence over the time signal when present.
struct DisturbanceSignal {
  Index p = 0;
  double sup_norm = 0.0;
  std::function<VectorXd(double)> signal;
  std::function<VectorXd(double, const VectorXd&)> feedback;

  VectorXd value(double t) const {
    VectorXd d = signal ? signal(t) : VectorXd::Zero(p);
    require_size(d, p, "d(t)");
    return d;
  }

  VectorXd at(double t, const VectorXd& x) const {
    if (feedback) {
      VectorXd d = feedback(t, x);
      require_size(d, p, "d(t, x)");
      return d;
    }
    return value(t);
  }

  static DisturbanceSignal zero(Index p) { return {p, 0.0, {}, {}}; }

  static DisturbanceSignal constant(const VectorXd& d) {
    return {d.size(), d.norm(), [d](double) { return d; }, {}};
  }

  // d(t) = amplitude · sin(frequency · t) · direction, direction normalised.
  static DisturbanceSignal sinusoid(const VectorXd& direction, double amplitude = 1.0,
                                    double frequency = 1.0) {
    const VectorXd dir = direction / direction.norm();
    return {dir.size(), std::abs(amplitude),
            [dir, amplitude, frequency](double t) -> VectorXd {
              return amplitude * std::sin(frequency * t) * dir;
            },
            {}};
  }

  // Constant planar disturbance of the given magnitude along angle (rad).
  static DisturbanceSignal planar_direction(double angle, double magnitude = 1.0) {
    VectorXd d(2);
    d << magnitude * std::cos(angle), magnitude * std::sin(angle);
    DisturbanceSignal s = constant(d);
    s.sup_norm = std::abs(magnitude);
    return s;
  }
};

// u = k(t, x). Nominal laws are allowed to depend on time (reference
// tracking); safeguarding controllers ignore t. The Jacobian is with respect
// to x and optional.
struct FeedbackLaw {
  std::function<VectorXd(double, const VectorXd&)> control;
  std::function<MatrixXd(const VectorXd&)> jacobian;

  VectorXd operator()(double t, const VectorXd& x) const { return control(t, x); }
  VectorXd operator()(const VectorXd& x) const { return control(0.0, x); }
  bool has_jacobian() const { return static_cast<bool>(jacobian); }

  static FeedbackLaw stationary(std::function<VectorXd(const VectorXd&)> k,
                                std::function<MatrixXd(const VectorXd&)> jac = {}) {
    return {[k = std::move(k)](double, const VectorXd& x) { return k(x); }, std::move(jac)};
  }

  static FeedbackLaw zero(Index m) {
    return stationary([m](const VectorXd&) -> VectorXd { return VectorXd::Zero(m); },
                      [m](const VectorXd& x) -> MatrixXd { return MatrixXd::Zero(m, x.size()); });
  }
};

using TimeVaryingField = std::function<VectorXd(double, const VectorXd&)>;

inline TimeVaryingField close_loop(DisturbedSystem sys, FeedbackLaw law, DisturbanceSignal d) {
  return [sys = std::move(sys), law = std::move(law), d = std::move(d)](double t,
                                                                         const VectorXd& x) {
    return eval_dynamics(sys, x, law(t, x), d.at(t, x));
  };
}

}  // namespace odcbf
