#pragma once

// Data series behind the pendulum and quadrotor figures.

#include <cmath>
#include <numbers>
#include <vector>

#include "odcbf/contour.hpp"
#include "odcbf/scenarios/pendulum.hpp"
#include "odcbf/scenarios/quadrotor.hpp"
#include "odcbf/sim.hpp"

namespace odcbf::scenarios {

struct LevelCurve {
  double delta = 0.0;
  double gamma = 0.0;
  std::vector<Segment> segments;
};

inline Grid2 default_pendulum_grid(int n = 241) { return {-1.6, 1.6, -6.0, 6.0, n, n}; }

// Boundaries of S (δ = 0) and S_δ = {h >= −γ(δ)} for each δ.
inline std::vector<LevelCurve> inflated_boundaries(const PendulumScenario& s,
                                                   const std::vector<double>& deltas,
                                                   const Grid2& grid) {
  std::vector<LevelCurve> out;
  auto h = [&s](double q, double qd) {
    VectorXd x(2);
    x << q, qd;
    return s.barrier.value(x);
  };
  for (double d : deltas) {
    LevelCurve c;
    c.delta = d;
    c.gamma = gamma_margin(s.barrier, d);
    c.segments = level_set(h, grid, -c.gamma);
    out.push_back(std::move(c));
  }
  return out;
}

// Closed-form branches q̇ = k₁(q) ± sqrt(2μ(h₁(q) + γ)) of {h = −γ}.
inline std::array<double, 2> inflated_boundary_branches(const PendulumScenario& s, double q,
                                                        double gamma) {
  const double k = s.k1(Vec<double>(VectorXd::Constant(1, q)))(0);
  const double r = std::sqrt(std::max(0.0, 2.0 * s.config.mu * (1.0 - q * q + gamma)));
  return {k - r, k + r};
}

struct EpsilonRun {
  double epsilon = 0.0;
  RolloutResult result;
};

// Pendulum rollouts under d(t) = sin t for each ε.
inline std::vector<EpsilonRun> pendulum_epsilon_runs(PendulumConfig cfg,
                                                     const std::vector<double>& epsilons,
                                                     const RolloutConfig& rc,
                                                     double amplitude = 1.0) {
  const auto cells = sweep(epsilons, [&](double eps) {
    PendulumConfig c = cfg;
    c.epsilon = eps;
    const auto s = build_pendulum(c);
    return rollout(s.rollout_spec(PendulumScenario::sin_disturbance(amplitude)), s.x0, rc);
  });
  std::vector<EpsilonRun> out;
  for (const auto& c : cells) {
    if (!c.ok()) throw Error("pendulum rollout failed at epsilon " + std::to_string(c.value) + ": " + c.error);
    out.push_back({c.value, *c.result});
  }
  return out;
}

inline std::vector<double> unit_circle_angles(int count = 8) {
  std::vector<double> out;
  for (int k = 0; k < count; ++k) out.push_back(2.0 * std::numbers::pi * k / count);
  return out;
}

}  // namespace odcbf::scenarios
