#include <cmath>
#include <numbers>
#include <stdexcept>

#include <gtest/gtest.h>

#include "odcbf/scenarios/pendulum.hpp"
#include "odcbf/sim.hpp"

using namespace odcbf;

namespace {

// ẋ = u + d on the line, barrier h = 1 − x.
DisturbedSystem line() {
  DisturbedSystem s;
  s.n = s.m = s.p = 1;
  s.f = [](const VectorXd&) { return VectorXd::Zero(1); };
  s.g = [](const VectorXd&) { return MatrixXd::Ones(1, 1); };
  s.w = [](const VectorXd&) { return MatrixXd::Ones(1, 1); };
  return s;
}

BarrierSpec wall() {
  BarrierSpec b;
  b.n = 1;
  b.h = [](const VectorXd& x) { return 1.0 - x(0); };
  b.grad_h = [](const VectorXd&) { return VectorXd::Constant(1, -1.0); };
  return b;
}

RolloutSpec line_spec(Controller c, DisturbanceSignal d) {
  RolloutSpec s;
  s.sys = line();
  s.controller = std::move(c);
  s.disturbance = std::move(d);
  s.barrier = wall();
  return s;
}

}  // namespace

TEST(Integrators, Rk4DecayExample) {
  const TimeVaryingField f = [](double, const VectorXd& x) -> VectorXd { return -x; };
  EXPECT_NEAR(rk4_step(f, 0.0, VectorXd::Ones(1), 0.1)(0), 0.9048375, 1e-7);
  EXPECT_NEAR(euler_step(f, 0.0, VectorXd::Ones(1), 0.1)(0), 0.9, 1e-15);
  EXPECT_THROW(rk4_step(f, 0.0, VectorXd::Ones(1), 0.0), ParameterError);
}

TEST(Integrators, HarmonicOscillatorPeriod) {
  const TimeVaryingField f = [](double, const VectorXd& x) -> VectorXd {
    return (VectorXd(2) << x(1), -x(0)).finished();
  };
  VectorXd x(2);
  x << 1.0, 0.0;
  const int steps = 6283;
  const double dt = 2.0 * std::numbers::pi / steps;
  for (int k = 0; k < steps; ++k) x = rk4_step(f, k * dt, x, dt);
  EXPECT_NEAR(x(0), 1.0, 1e-9);
  EXPECT_NEAR(x(1), 0.0, 1e-9);
}

TEST(Integrators, NonFiniteDerivativeThrows) {
  const TimeVaryingField f = [](double, const VectorXd& x) -> VectorXd {
    return VectorXd::Constant(1, x(0) > 0.5 ? std::nan("") : 1.0);
  };
  try {
    rk4_step(f, 0.3, VectorXd::Constant(1, 0.6), 0.1);
    FAIL();
  } catch (const IntegrationError& e) {
    EXPECT_EQ(e.time(), 0.3);
  }
}

TEST(Rollout, ConfigValidation) {
  RolloutConfig c;
  c.dt = -1;
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.t_final = 1e-5;
  EXPECT_THROW(c.validate(), ParameterError);
  EXPECT_EQ(RolloutConfig{}.steps(), 10000u);
}

TEST(Rollout, RecordsEveryStepAndUsesDisturbance) {
  auto spec = line_spec(from_law(FeedbackLaw::zero(1)), DisturbanceSignal::constant(VectorXd::Constant(1, -0.5)));
  RolloutConfig rc;
  rc.t_final = 1.0;
  rc.dt = 0.01;
  const auto r = rollout(spec, VectorXd::Zero(1), rc);
  EXPECT_EQ(r.traj.size(), 101u);
  EXPECT_NEAR(r.traj.states.back()(0), -0.5, 1e-12);
  EXPECT_FALSE(r.truncated);
  rc.record_every = 10;
  EXPECT_EQ(rollout(spec, VectorXd::Zero(1), rc).traj.size(), 11u);
}

TEST(Rollout, DisturbanceAboveDeclaredBoundRejected) {
  DisturbanceSignal d = DisturbanceSignal::constant(VectorXd::Constant(1, 2.0));
  d.sup_norm = 1.0;
  auto spec = line_spec(from_law(FeedbackLaw::zero(1)), d);
  RolloutConfig rc;
  rc.t_final = 0.1;
  EXPECT_THROW(rollout(spec, VectorXd::Zero(1), rc), ParameterError);
}

TEST(Rollout, TruncatesWhenLeavingDomain) {
  auto spec = line_spec(from_law(FeedbackLaw::stationary([](const VectorXd&) { return VectorXd::Ones(1); })),
                        DisturbanceSignal::zero(1));
  spec.domain_b = 0.5;
  RolloutConfig rc;
  rc.dt = 0.01;
  rc.t_final = 5.0;
  const auto r = rollout(spec, VectorXd::Zero(1), rc);
  EXPECT_TRUE(r.truncated);
  EXPECT_FALSE(r.aborted);
  EXPECT_LT(r.traj.states.back()(0), 1.5);
  EXPECT_GT(r.traj.states.back()(0), 1.48);
  EXPECT_THROW(rollout(spec, VectorXd::Constant(1, 2.0), rc), DomainError);
}

TEST(Rollout, ControllerFailureAbortsWithStepIndex) {
  Controller c = [](double t, const VectorXd&) -> ControlOutput {
    if (t >= 0.5 - 1e-12) throw InfeasiblePointError("no feasible input", -1.0);
    return {VectorXd::Zero(1)};
  };
  RolloutConfig rc;
  rc.dt = 0.01;
  rc.t_final = 1.0;
  const auto r = rollout(line_spec(c, DisturbanceSignal::zero(1)), VectorXd::Zero(1), rc);
  EXPECT_TRUE(r.aborted);
  EXPECT_TRUE(r.truncated);
  ASSERT_TRUE(r.abort_step.has_value());
  // The last RK4 stage of step 49 evaluates the controller at t = 0.5.
  EXPECT_EQ(*r.abort_step, 49u);
  EXPECT_FALSE(r.diagnostic.empty());
}

TEST(Rollout, FilterKeepsPendulumSafeWithoutDisturbance) {
  const auto sc = scenarios::build_pendulum({});
  RolloutConfig rc;
  rc.t_final = 6.0;
  const auto r = rollout(sc.rollout_spec(DisturbanceSignal::zero(1)), sc.x0, rc);
  EXPECT_FALSE(r.truncated);
  EXPECT_GE(r.metrics.min_h, -1e-6);
  EXPECT_TRUE(r.metrics.theta_floor_ok);
  EXPECT_TRUE(r.metrics.issf_bound_satisfied);
  for (double th : r.traj.omegas) EXPECT_GE(th, sc.config.theta_d);
}

TEST(Rollout, UnfilteredNominalLeavesSafeSet) {
  const auto sc = scenarios::build_pendulum({});
  RolloutConfig rc;
  rc.t_final = 6.0;
  const auto r = rollout(sc.rollout_spec(DisturbanceSignal::zero(1), false), sc.x0, rc);
  EXPECT_LT(r.metrics.min_layer_h, 0.0);
  for (double th : r.traj.omegas) EXPECT_TRUE(std::isnan(th));
}

TEST(Metrics, BoundAndFloor) {
  Trajectory tr;
  tr.h_values = {0.5, -0.2, 0.1};
  tr.layer_h_values = {1.0, 0.3};
  tr.omegas = {1.0, std::nan(""), 2.0};
  BarrierSpec b = wall();
  const auto m = compute_metrics(tr, b, 0.5, 1e-6);
  EXPECT_EQ(m.min_h, -0.2);
  EXPECT_EQ(m.min_layer_h, 0.3);
  EXPECT_EQ(m.max_violation, 0.2);
  EXPECT_NEAR(m.gamma, 0.125, 1e-15);
  EXPECT_FALSE(m.issf_bound_satisfied);
  EXPECT_TRUE(m.theta_floor_ok);
  tr.omegas = {0.5};
  EXPECT_FALSE(compute_metrics(tr, b, 0.5, 1e-6).theta_floor_ok);
}

TEST(Sweep, CapturesErrorsPerCell) {
  const auto cells = sweep({1.0, -1.0, 2.0}, [](double v) -> RolloutResult {
    if (v < 0) throw ParameterError("negative");
    RolloutResult r;
    r.metrics.min_h = v;
    return r;
  });
  ASSERT_EQ(cells.size(), 3u);
  EXPECT_TRUE(cells[0].ok());
  EXPECT_FALSE(cells[1].ok());
  EXPECT_EQ(cells[1].error, "negative");
  EXPECT_EQ(cells[2].result->metrics.min_h, 2.0);
  EXPECT_THROW(sweep({}, [](double) { return RolloutResult{}; }), ParameterError);
}

TEST(Sweep, ParallelMatchesSerial) {
  const auto sc = scenarios::build_pendulum({});
  RolloutConfig rc;
  rc.t_final = 1.0;
  auto make = [&](double amp) {
    return rollout(sc.rollout_spec(scenarios::PendulumScenario::sin_disturbance(amp)), sc.x0, rc);
  };
  const std::vector<double> grid = {0.0, 0.5, 1.0};
  const auto par = sweep(grid, make, true);
  const auto ser = sweep(grid, make, false);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    ASSERT_TRUE(par[i].ok() && ser[i].ok());
    EXPECT_EQ(par[i].result->traj.states.back(), ser[i].result->traj.states.back());
  }
}

TEST(Rollout, StepHalvingShowsFourthOrderConvergence) {
  // Smooth closed loop: the nominal tracking law without the filter.
  const auto sc = scenarios::build_pendulum({});
  const auto spec = sc.rollout_spec(scenarios::PendulumScenario::sin_disturbance(), false);
  auto final_state = [&](double dt) {
    RolloutConfig rc;
    rc.dt = dt;
    rc.t_final = 2.0;
    return rollout(spec, sc.x0, rc).traj.states.back();
  };
  const VectorXd a = final_state(0.02), b = final_state(0.01), c = final_state(0.005);
  const double ratio = (a - b).norm() / (b - c).norm();
  EXPECT_GE(ratio, 8.0);
  EXPECT_LE(ratio, 32.0);
}

TEST(Rollout, DecayScaleNeverBelowFloorUnderDisturbance) {
  scenarios::PendulumConfig cfg;
  cfg.epsilon = 10.0;
  const auto sc = scenarios::build_pendulum(cfg);
  const auto r = rollout(sc.rollout_spec(scenarios::PendulumScenario::sin_disturbance()), sc.x0, RolloutConfig{});
  EXPECT_TRUE(r.metrics.theta_floor_ok);
  for (double th : r.traj.omegas) EXPECT_GE(th, sc.config.theta_d - 1e-12);
  EXPECT_TRUE(r.metrics.issf_bound_satisfied);
  EXPECT_LT(r.metrics.min_h, 0.0);
}
