#pragma once

// Simplified planar quadrotor as a dual-relative-degree system.
//   z = (x, y, ẋ, ẏ):  ż = f_z + g_z ψ(θ) T + w_z d,  ψ(θ) = (−sin θ, cos θ)
//   η = θ:             θ̇ = ω
// Wall constraint x <= x_max, reduced to relative degree one by
//   h_z(z) = −ẋ + a₁(x_max − x).

#include <cmath>
#include <map>
#include <string>

#include "odcbf/drd.hpp"
#include "odcbf/od_filter.hpp"
#include "odcbf/sim.hpp"
#include "odcbf/smooth_synthesis.hpp"

namespace odcbf::scenarios {

struct QuadrotorConfig {
  double mass = 1.0;
  double gravity = 9.81;
  double inertia = 1.0;  // unused with ω as input
  double x_max = 2.0;
  double wall_gain = 1.0;
  double mu = 0.5;
  double sigma = 1.0;
  double epsilon = 1.0;
  double theta_d = 1.0;
  double p_weight = 1.0;
  double alpha_gain = 1.0;
  // Nominal virtual thrust: x channel saturates toward x_ref (past the wall),
  // y channel holds altitude with thrust in [0.5mg, 1.5mg].
  double x_ref = 3.0;
  double kx = 2.0;
  double kvx = 2.0;
  double ky = 1.0;
  double kvy = 1.0;
  double v_min_fraction = 0.1;
  double attitude_gain = 5.0;
  double x0 = 0.0;
  double y0 = 0.0;
  double vx0 = 0.0;
  double vy0 = 0.0;
  double theta0 = 0.0;

  std::map<std::string, double*> fields() {
    return {{"mass", &mass},        {"gravity", &gravity},  {"inertia", &inertia},
            {"x_max", &x_max},      {"wall_gain", &wall_gain}, {"mu", &mu},
            {"sigma", &sigma},      {"epsilon", &epsilon},  {"theta_d", &theta_d},
            {"p_weight", &p_weight},       {"alpha_gain", &alpha_gain}, {"x_ref", &x_ref},
            {"kx", &kx},            {"kvx", &kvx},          {"ky", &ky},
            {"kvy", &kvy},          {"v_min_fraction", &v_min_fraction},
            {"attitude_gain", &attitude_gain}, {"x0", &x0}, {"y0", &y0},
            {"vx0", &vx0},          {"vy0", &vy0},          {"theta0", &theta0}};
  }

  double v_min() const { return v_min_fraction * mass * gravity; }

  void validate() const {
    for (double v : {mass, gravity, wall_gain, mu, sigma, epsilon, theta_d, p_weight, alpha_gain,
                     attitude_gain}) {
      if (!(v > 0.0)) throw ParameterError("quadrotor: parameters must be positive");
    }
    if (!std::isfinite(x_max)) throw ParameterError("quadrotor: x_max must be finite");
    if (!(v_min_fraction >= 0.0 && v_min_fraction < 0.5)) {
      throw ThrustDomainError("quadrotor: thrust guard v_min must lie in [0, 0.5 m g)");
    }
  }
};

namespace quadrotor_detail {

// Translational layer with the virtual thrust vector v as input.
struct Translational {
  double mass, gravity;
  Index state_dim() const { return 4; }
  Index input_dim() const { return 2; }
  Index disturbance_dim() const { return 2; }
  template <class T>
  Vec<T> drift(const Vec<T>& z) const {
    Vec<T> out(4);
    out << z(2), z(3), T(0.0), T(-gravity);
    return out;
  }
  template <class T>
  Mat<T> input_matrix(const Vec<T>&) const {
    Mat<T> out = Mat<T>::Zero(4, 2);
    out(2, 0) = T(1.0 / mass);
    out(3, 1) = T(1.0 / mass);
    return out;
  }
  template <class T>
  Mat<T> disturbance_matrix(const Vec<T>& z) const { return input_matrix(z); }
};

// θ̇ = ω, no disturbance.
struct Attitude {
  Index state_dim() const { return 1; }
  Index input_dim() const { return 1; }
  Index disturbance_dim() const { return 2; }
  template <class T>
  Vec<T> drift(const Vec<T>&) const { return Vec<T>::Zero(1); }
  template <class T>
  Mat<T> input_matrix(const Vec<T>&) const { return Mat<T>::Ones(1, 1); }
  template <class T>
  Mat<T> disturbance_matrix(const Vec<T>&) const { return Mat<T>::Zero(1, 2); }
};

struct ThrustDirection {
  template <class T>
  Mat<T> operator()(const Vec<T>& eta) const {
    using std::cos;
    using std::sin;
    Mat<T> out(2, 1);
    out(0, 0) = -sin(eta(0));
    out(1, 0) = cos(eta(0));
    return out;
  }
};

struct WallBarrier {
  double x_max, gain;
  template <class T>
  T operator()(const Vec<T>& z) const { return T(-z(2) + gain * (x_max - z(0))); }
  VectorXd gradient(const VectorXd&) const {
    VectorXd g = VectorXd::Zero(4);
    g(0) = -gain;
    g(2) = -1.0;
    return g;
  }
};

struct NominalThrust {
  double mass, gravity, x_ref, kx, kvx, ky, kvy;
  template <class T>
  Vec<T> operator()(const Vec<T>& z) const {
    using std::tanh;
    Vec<T> v(2);
    v(0) = mass * (kx * tanh(T(x_ref - z(0))) - kvx * z(2));
    v(1) = mass * gravity * (1.0 + 0.5 * tanh(T(-ky * z(1) - kvy * z(3))));
    return v;
  }
};

using System = DrdSystem<Translational, Attitude, ThrustDirection>;
using VirtualThrust = SmoothVirtualController<Translational, WallBarrier, NominalThrust>;
using Barrier = DrdBarrier<WallBarrier, VirtualThrust, QuadrotorAttitudeMap>;

}  // namespace quadrotor_detail

struct QuadrotorScenario {
  QuadrotorConfig config;
  quadrotor_detail::System model;
  quadrotor_detail::VirtualThrust k_v;
  quadrotor_detail::Barrier drd;

  DisturbedSystem physical;  // (x, y, ẋ, ẏ, θ) with input (T, ω)
  DisturbedSystem partial;   // same state, input ω, T = ψ†k_v
  DisturbedSystem top;       // z with v as input
  BarrierSpec barrier;       // DRD composite, on `partial`
  BarrierSpec wall_barrier;  // h_z, on `top`
  FeedbackLaw thrust_law;    // T(z, θ) = ψ(θ)†k_v(z)
  FeedbackLaw nominal_rate;  // ω = k_θ(η_d(z) − θ)
  SafeSetGeometry geometry;
  SafeSetGeometry top_geometry;
  VectorXd x0;

  double eta_d(const VectorXd& z) const { return drd.desired_eta(Vec<double>(z.head(4)))(0); }

  // Full controller over the physical system: T from alignment, ω from the
  // OD-ISSf filter on the partial closed loop.
  Controller controller(bool filtered = true, FilterOptions opts = {}) const {
    const DisturbedSystem part = partial;
    const BarrierSpec bar = barrier;
    const FeedbackLaw thrust = thrust_law, rate = nominal_rate;
    return [part, bar, thrust, rate, filtered, opts](double t, const VectorXd& x) {
      ControlOutput out;
      out.u = VectorXd(2);
      out.u(0) = thrust(t, x)(0);
      if (filtered) {
        const FilterResult r = od_issf_filter(part, bar, rate, x, t, opts);
        out.u(1) = r.u(0);
        out.theta = r.theta_x;
      } else {
        out.u(1) = rate(t, x)(0);
      }
      return out;
    };
  }

  RolloutSpec rollout_spec(const DisturbanceSignal& d, bool filtered = true,
                           FilterOptions opts = {}) const {
    RolloutSpec s;
    s.sys = physical;
    s.controller = controller(filtered, opts);
    s.disturbance = d;
    s.barrier = barrier;
    const quadrotor_detail::WallBarrier wall{config.x_max, config.wall_gain};
    s.layer_h = [wall](const VectorXd& x) { return wall(Vec<double>(x.head(4))); };
    s.domain_b = geometry.b;
    return s;
  }
};

inline QuadrotorScenario build_quadrotor(const QuadrotorConfig& c) {
  using namespace quadrotor_detail;
  c.validate();
  const auto alpha = ExtendedClassK::linear(c.alpha_gain);
  System model{Translational{c.mass, c.gravity}, Attitude{}, ThrustDirection{}, 1};
  const WallBarrier wall{c.x_max, c.wall_gain};
  VirtualThrust k_v(model.top, wall, alpha, c.epsilon, c.theta_d, c.sigma,
                    NominalThrust{c.mass, c.gravity, c.x_ref, c.kx, c.kvx, c.ky, c.kvy}, 1);
  Barrier drd = drd_barrier(wall, k_v, QuadrotorAttitudeMap{c.v_min()}, 1, c.mu);

  QuadrotorScenario s{c, model, k_v, drd, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}};
  s.physical = model.physical();
  s.partial = partial_closed_loop(model, k_v);
  s.top = to_system(model.top);
  s.barrier = make_barrier_spec(drd, 5, alpha, c.epsilon, c.theta_d, c.p_weight);
  s.wall_barrier = make_barrier_spec(wall, 4, alpha, c.epsilon, c.theta_d, c.p_weight);
  s.thrust_law = aligned_top_law(model, k_v);
  const double gain = c.attitude_gain;
  s.nominal_rate = FeedbackLaw::stationary([drd, gain](const VectorXd& x) -> VectorXd {
    const double target = drd.desired_eta(Vec<double>(x.head(4)))(0);
    return VectorXd::Constant(1, gain * (target - x(4)));
  });

  VectorXd lo(5), hi(5);
  lo << -1.0, -2.0, -3.0, -3.0, -1.2;
  hi << 4.0, 2.0, 3.0, 3.0, 1.2;
  s.geometry = make_geometry(s.barrier);
  s.geometry.box_lower = lo;
  s.geometry.box_upper = hi;
  s.top_geometry = make_geometry(s.wall_barrier);
  s.top_geometry.box_lower = VectorXd(lo.head(4));
  s.top_geometry.box_upper = VectorXd(hi.head(4));

  s.x0 = VectorXd(5);
  s.x0 << c.x0, c.y0, c.vx0, c.vy0, c.theta0;
  return s;
}

}  // namespace odcbf::scenarios
