#pragma once

// Inverted pendulum with a disturbance entering both layers:
//   q̇  = q̇_s + ν d
//   q̈_s = (g/l) sin q − β q̇_s + u/(ml²) + d/(ml²)
// Safety: |q| <= 1 through h₁(q) = 1 − q², backstepped to the full state.

#include <cmath>
#include <map>
#include <string>

#include "odcbf/backstepping.hpp"
#include "odcbf/od_filter.hpp"
#include "odcbf/sim.hpp"
#include "odcbf/smooth_synthesis.hpp"

namespace odcbf::scenarios {

struct PendulumConfig {
  double mass = 1.0;
  double length = 1.0;
  double gravity = 9.81;
  double damping = 0.1;
  double nu = 0.5;
  double mu = 0.5;
  double sigma = 1.0;
  double epsilon = 1.0;
  double theta_d = 1.0;
  double p_weight = 1.0;
  double alpha_gain = 1.0;
  // Nominal: computed-torque tracking of q_ref(t) = ref_amplitude·sin(ref_frequency·t).
  double ref_amplitude = 1.2;
  double ref_frequency = 0.5;
  double kp = 4.0;
  double kd = 4.0;
  double q0 = 0.0;
  double qdot0 = 0.0;
  // Sampling box for verification.
  double q_box = 1.5;
  double qdot_box = 8.0;

  std::map<std::string, double*> fields() {
    return {{"mass", &mass},        {"length", &length},  {"gravity", &gravity},
            {"damping", &damping},     {"nu", &nu},          {"mu", &mu},
            {"sigma", &sigma},      {"epsilon", &epsilon}, {"theta_d", &theta_d},
            {"p_weight", &p_weight},       {"alpha_gain", &alpha_gain},
            {"ref_amplitude", &ref_amplitude}, {"ref_frequency", &ref_frequency},
            {"kp", &kp},            {"kd", &kd},          {"q0", &q0},
            {"qdot0", &qdot0},      {"q_box", &q_box},    {"qdot_box", &qdot_box}};
  }

  void validate() const {
    for (double v : {mass, length, gravity, mu, sigma, epsilon, theta_d, p_weight, alpha_gain,
                     q_box, qdot_box}) {
      if (!(v > 0.0)) throw ParameterError("pendulum: parameters must be positive");
    }
    if (damping < 0.0 || nu < 0.0) throw ParameterError("pendulum: beta and nu must be nonnegative");
  }
};

namespace pendulum_detail {

struct AngleDrift {
  template <class T>
  Vec<T> operator()(const Vec<T>&) const { return Vec<T>::Zero(1); }
};
struct AngleInput {
  template <class T>
  Mat<T> operator()(const Vec<T>&) const { return Mat<T>::Ones(1, 1); }
};
struct AngleDisturbance {
  double nu;
  template <class T>
  Mat<T> operator()(const Vec<T>&) const { return Mat<T>::Constant(1, 1, T(nu)); }
};
struct RateDrift {
  double g_over_l, beta;
  template <class T>
  Vec<T> operator()(const Vec<T>& x) const {
    using std::sin;
    Vec<T> out(1);
    out(0) = g_over_l * sin(x(0)) - beta * x(1);
    return out;
  }
};
struct RateGain {
  double inv_inertia;
  template <class T>
  Mat<T> operator()(const Vec<T>&) const { return Mat<T>::Constant(1, 1, T(inv_inertia)); }
};
struct AngleBarrier {
  template <class T>
  T operator()(const Vec<T>& x) const { return T(1.0 - x(0) * x(0)); }
  VectorXd gradient(const VectorXd& x) const { return VectorXd::Constant(1, -2.0 * x(0)); }
};

inline auto make_system(const PendulumConfig& c) {
  const double inv_inertia = 1.0 / (c.mass * c.length * c.length);
  return make_strict_feedback(
      make_layer(1, 1, 1, AngleDrift{}, AngleInput{}, AngleDisturbance{c.nu}),
      make_layer(1, 1, 1, RateDrift{c.gravity / c.length, c.damping}, RateGain{inv_inertia},
                 RateGain{inv_inertia}));
}

using System = decltype(make_system(PendulumConfig{}));
using VirtualController = SmoothVirtualController<TruncatedModel<1, System>, AngleBarrier>;
using Composite = CompositeBarrier<AngleBarrier, VirtualController>;

}  // namespace pendulum_detail

struct PendulumScenario {
  PendulumConfig config;
  pendulum_detail::System model;
  pendulum_detail::VirtualController k1;
  pendulum_detail::Composite composite;

  DisturbedSystem full;    // (q, q̇) with torque input
  DisturbedSystem layer1;  // q with q̇ as virtual input
  BarrierSpec barrier;     // composite, on `full`
  BarrierSpec layer_barrier;  // h₁, on `layer1`
  FeedbackLaw nominal;
  SafeSetGeometry geometry;
  SafeSetGeometry layer_geometry;
  VectorXd x0;

  double h1(const VectorXd& x) const { return 1.0 - x(0) * x(0); }

  // d(t) = amplitude·sin t.
  static DisturbanceSignal sin_disturbance(double amplitude = 1.0) {
    return DisturbanceSignal::sinusoid(VectorXd::Ones(1), amplitude, 1.0);
  }

  RolloutSpec rollout_spec(const DisturbanceSignal& d, bool filtered = true,
                           FilterOptions opts = {}) const {
    RolloutSpec s;
    s.sys = full;
    s.controller = filtered ? filtered_controller(full, barrier, nominal, opts) : from_law(nominal);
    s.disturbance = d;
    s.barrier = barrier;
    s.layer_h = [](const VectorXd& x) { return 1.0 - x(0) * x(0); };
    s.domain_b = geometry.b;
    return s;
  }
};

inline FeedbackLaw pendulum_nominal(const PendulumConfig& c) {
  const double inertia = c.mass * c.length * c.length;
  return {[c, inertia](double t, const VectorXd& x) -> VectorXd {
            const double w = c.ref_frequency;
            const double qr = c.ref_amplitude * std::sin(w * t);
            const double qr_dot = c.ref_amplitude * w * std::cos(w * t);
            const double qr_ddot = -c.ref_amplitude * w * w * std::sin(w * t);
            const double accel = qr_ddot + c.kd * (qr_dot - x(1)) + c.kp * (qr - x(0));
            const double drift = c.gravity / c.length * std::sin(x(0)) - c.damping * x(1);
            return VectorXd::Constant(1, inertia * (accel - drift));
          },
          [c, inertia](const VectorXd& x) -> MatrixXd {
            MatrixXd j(1, 2);
            j << inertia * (-c.kp - c.gravity / c.length * std::cos(x(0))),
                inertia * (-c.kd + c.damping);
            return j;
          }};
}

inline PendulumScenario build_pendulum(const PendulumConfig& c) {
  using namespace pendulum_detail;
  c.validate();
  const auto alpha = ExtendedClassK::linear(c.alpha_gain);
  System model = make_system(c);
  VirtualController k1(model.truncated<1>(), AngleBarrier{}, alpha, c.epsilon, c.theta_d, c.sigma,
                       NoNominal{}, 1);
  Composite comp = compose_barrier(AngleBarrier{}, k1, c.mu);

  PendulumScenario s{c, model, k1, comp, {}, {}, {}, {}, {}, {}, {}, {}};
  s.full = to_system(model.full());
  s.layer1 = to_system(model.truncated<1>());
  s.barrier = make_barrier_spec(comp, 2, alpha, c.epsilon, c.theta_d, c.p_weight);
  s.layer_barrier = make_barrier_spec(AngleBarrier{}, 1, alpha, c.epsilon, c.theta_d, c.p_weight);
  s.nominal = pendulum_nominal(c);

  s.geometry = make_geometry(s.barrier);
  s.geometry.box_lower = VectorXd(2);
  s.geometry.box_upper = VectorXd(2);
  *s.geometry.box_lower << -c.q_box, -c.qdot_box;
  *s.geometry.box_upper << c.q_box, c.qdot_box;
  s.geometry.c = 1.0;

  s.layer_geometry = make_geometry(s.layer_barrier, std::numeric_limits<double>::infinity(), 1.0);
  s.layer_geometry.box_lower = VectorXd::Constant(1, -c.q_box);
  s.layer_geometry.box_upper = VectorXd::Constant(1, c.q_box);

  s.x0 = VectorXd(2);
  s.x0 << c.q0, c.qdot0;
  return s;
}

}  // namespace odcbf::scenarios
