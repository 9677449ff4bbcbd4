#pragma once

// Fixed-step rollouts of disturbed closed loops with safety metrics.

#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "odcbf/barrier.hpp"
#include "odcbf/dynamics.hpp"
#include "odcbf/od_filter.hpp"

namespace odcbf {

enum class Integrator { rk4, euler };

struct RolloutConfig {
  double dt = 1e-3;
  double t_final = 10.0;
  Integrator integrator = Integrator::rk4;
  std::size_t record_every = 1;

  void validate() const {
    if (!(dt > 0.0)) throw ParameterError("dt must be positive");
    if (!(t_final >= dt)) throw ParameterError("t_final must be at least dt");
    if (record_every == 0) throw ParameterError("record_every must be positive");
  }

  std::size_t steps() const { return static_cast<std::size_t>(std::llround(t_final / dt)); }
};

inline void require_finite(const VectorXd& v, double t, const VectorXd& x, const char* what) {
  if (!v.allFinite()) {
    throw IntegrationError(std::string("non-finite ") + what + " at t = " + std::to_string(t), t, x);
  }
}

inline VectorXd rk4_step(const TimeVaryingField& field, double t, const VectorXd& x, double dt) {
  if (!(dt > 0.0)) throw ParameterError("dt must be positive");
  const VectorXd k1 = field(t, x);
  require_finite(k1, t, x, "derivative");
  const VectorXd k2 = field(t + 0.5 * dt, x + 0.5 * dt * k1);
  require_finite(k2, t, x, "derivative");
  const VectorXd k3 = field(t + 0.5 * dt, x + 0.5 * dt * k2);
  require_finite(k3, t, x, "derivative");
  const VectorXd k4 = field(t + dt, x + dt * k3);
  require_finite(k4, t, x, "derivative");
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline VectorXd euler_step(const TimeVaryingField& field, double t, const VectorXd& x, double dt) {
  if (!(dt > 0.0)) throw ParameterError("dt must be positive");
  const VectorXd k1 = field(t, x);
  require_finite(k1, t, x, "derivative");
  return x + dt * k1;
}

// Controller output: input and realised decay scale θ(x) (NaN when the
// controller is not a filter).
struct ControlOutput {
  VectorXd u;
  double theta = std::numeric_limits<double>::quiet_NaN();
};

using Controller = std::function<ControlOutput(double, const VectorXd&)>;

inline Controller from_law(FeedbackLaw law) {
  return [law = std::move(law)](double t, const VectorXd& x) { return ControlOutput{law(t, x)}; };
}

inline Controller filtered_controller(DisturbedSystem sys, BarrierSpec bar, FeedbackLaw k_d,
                                      FilterOptions opts = {}) {
  return [sys = std::move(sys), bar = std::move(bar), k_d = std::move(k_d), opts](
             double t, const VectorXd& x) {
    const FilterResult r = od_issf_filter(sys, bar, k_d, x, t, opts);
    return ControlOutput{r.u, r.theta_x};
  };
}

struct Trajectory {
  std::vector<double> times;
  std::vector<VectorXd> states;
  std::vector<VectorXd> inputs;
  std::vector<double> omegas;
  std::vector<VectorXd> disturbances;
  std::vector<double> h_values;
  std::vector<double> layer_h_values;

  std::size_t size() const { return times.size(); }
};

struct SafetyMetrics {
  double min_h = std::numeric_limits<double>::infinity();
  double min_layer_h = std::numeric_limits<double>::infinity();
  double max_violation = 0.0;
  double gamma = 0.0;
  bool issf_bound_satisfied = true;
  bool theta_floor_ok = true;
};

struct RolloutResult {
  Trajectory traj;
  SafetyMetrics metrics;
  bool truncated = false;  // left D or aborted
  bool aborted = false;    // controller failure
  std::optional<std::size_t> abort_step;
  std::string diagnostic;
};

struct RolloutSpec {
  DisturbedSystem sys;
  Controller controller;
  DisturbanceSignal disturbance;
  BarrierSpec barrier;
  // Layer barrier (h₁ or h_z); defaults to the barrier itself.
  std::function<double(const VectorXd&)> layer_h;
  double domain_b = std::numeric_limits<double>::infinity();
  double safety_tol = 1e-6;
};

inline SafetyMetrics compute_metrics(const Trajectory& traj, const BarrierSpec& bar, double delta,
                                     double tol) {
  SafetyMetrics m;
  for (double h : traj.h_values) m.min_h = std::min(m.min_h, h);
  for (double h : traj.layer_h_values) m.min_layer_h = std::min(m.min_layer_h, h);
  m.max_violation = std::max(0.0, -m.min_h);
  try {
    m.gamma = gamma_margin(bar, delta);
    m.issf_bound_satisfied = m.min_h >= -m.gamma - tol;
  } catch (const MarginUndefinedError&) {
    m.gamma = std::numeric_limits<double>::quiet_NaN();
    m.issf_bound_satisfied = false;
  }
  for (double th : traj.omegas) {
    if (std::isnan(th)) continue;
    if (th < bar.theta_d - 1e-12) m.theta_floor_ok = false;
  }
  return m;
}

inline RolloutResult rollout(const RolloutSpec& spec, const VectorXd& x0, const RolloutConfig& cfg) {
  cfg.validate();
  const DisturbedSystem& sys = spec.sys;
  require_size(x0, sys.n, "x0");
  if (spec.disturbance.p != sys.p) throw ShapeError("disturbance: dimension differs from system");
  if (!(spec.barrier.value(x0) + spec.domain_b > 0.0)) throw DomainError("x0 outside D");
  auto layer_h = spec.layer_h ? spec.layer_h : spec.barrier.h;
  const double delta = spec.disturbance.sup_norm;
  const double bound_tol = 1e-12 * (1.0 + delta);

  auto disturbance_at = [&](double t, const VectorXd& x) {
    VectorXd d = spec.disturbance.at(t, x);
    if (d.norm() > delta + bound_tol) {
      throw ParameterError("disturbance norm " + std::to_string(d.norm()) +
                           " exceeds declared bound " + std::to_string(delta) + " at t = " +
                           std::to_string(t));
    }
    return d;
  };
  const TimeVaryingField field = [&](double t, const VectorXd& x) -> VectorXd {
    return eval_dynamics(sys, x, spec.controller(t, x).u, disturbance_at(t, x));
  };

  RolloutResult res;
  Trajectory& tr = res.traj;
  auto record = [&](double t, const VectorXd& x, const ControlOutput& c, const VectorXd& d) {
    tr.times.push_back(t);
    tr.states.push_back(x);
    tr.inputs.push_back(c.u);
    tr.omegas.push_back(c.theta);
    tr.disturbances.push_back(d);
    tr.h_values.push_back(spec.barrier.value(x));
    tr.layer_h_values.push_back(layer_h(x));
  };

  const std::size_t n_steps = cfg.steps();
  VectorXd x = x0;
  for (std::size_t k = 0; k <= n_steps; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    ControlOutput c;
    try {
      c = spec.controller(t, x);
    } catch (const Error& e) {
      res.aborted = res.truncated = true;
      res.abort_step = k;
      res.diagnostic = std::string("controller failed at step ") + std::to_string(k) + ": " + e.what();
      break;
    }
    if (k % cfg.record_every == 0) record(t, x, c, disturbance_at(t, x));
    if (k == n_steps) break;
    VectorXd next;
    try {
      next = cfg.integrator == Integrator::rk4 ? rk4_step(field, t, x, cfg.dt)
                                               : euler_step(field, t, x, cfg.dt);
    } catch (const IntegrationError&) {
      throw;
    } catch (const ParameterError&) {
      throw;
    } catch (const Error& e) {
      res.aborted = res.truncated = true;
      res.abort_step = k;
      res.diagnostic = std::string("controller failed at step ") + std::to_string(k) + ": " + e.what();
      break;
    }
    if (!(spec.barrier.value(next) + spec.domain_b > 0.0)) {
      res.truncated = true;
      res.diagnostic = "state left D at t = " + std::to_string(t + cfg.dt);
      break;
    }
    x = std::move(next);
  }
  res.metrics = compute_metrics(tr, spec.barrier, delta, spec.safety_tol);
  return res;
}

struct SweepCell {
  double value = 0.0;
  std::optional<RolloutResult> result;
  std::string error;
  bool ok() const { return result.has_value(); }
};

// One rollout per grid value; cells run concurrently and failures are
// captured per cell. Results keep grid order.
template <class MakeRollout>
std::vector<SweepCell> sweep(const std::vector<double>& grid, MakeRollout make_rollout,
                             bool parallel = true) {
  if (grid.empty()) throw ParameterError("sweep grid is empty");
  auto run_cell = [&make_rollout](double v) {
    SweepCell cell;
    cell.value = v;
    try {
      cell.result = make_rollout(v);
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
    return cell;
  };
  std::vector<SweepCell> out;
  out.reserve(grid.size());
  if (!parallel) {
    for (double v : grid) out.push_back(run_cell(v));
    return out;
  }
  std::vector<std::future<SweepCell>> futs;
  futs.reserve(grid.size());
  for (double v : grid) futs.push_back(std::async(std::launch::async, run_cell, v));
  for (auto& f : futs) out.push_back(f.get());
  return out;
}

}  // namespace odcbf
