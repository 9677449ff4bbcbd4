// odcbf: run, sweep, verify and export plot data for the shipped scenarios.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "odcbf/io.hpp"
#include "odcbf/scenarios/plotdata.hpp"
#include "odcbf/verify.hpp"

namespace fs = std::filesystem;
using namespace odcbf;
using namespace odcbf::scenarios;
using odcbf::io::json;

namespace {

enum Exit { kOk = 0, kVerifyFail = 1, kUsage = 2, kBuild = 3, kRuntime = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BuildError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string scenario = "pendulum";
  std::string disturbance;  // scenario default when empty
  double delta = 1.0;
  double dt = 1e-3;
  double t_final = 10.0;
  std::uint64_t seed = 42;
  std::string out = "out";
  bool unfiltered = false;
  std::string form = "kkt";
  std::map<std::string, double> params;
};

// Registers every scenario parameter as --<name> on the subcommand.
void add_scenario_options(CLI::App* app, Common& c) {
  PendulumConfig pc;
  QuadrotorConfig qc;
  std::set<std::string> names;
  for (const auto& [k, v] : pc.fields()) names.insert(k);
  for (const auto& [k, v] : qc.fields()) names.insert(k);
  for (const auto& name : names) {
    app->add_option_function<double>(
           "--" + name, [&c, name](double v) { c.params[name] = v; }, "scenario parameter")
        ->group("Scenario parameters");
  }
}

void add_common(CLI::App* app, Common& c) {
  app->fallthrough();
  app->add_option("--scenario", c.scenario, "pendulum | quadrotor")->capture_default_str();
  app->add_option("--disturbance", c.disturbance, "sin | none | dir:<angle rad>");
  app->add_option("--delta", c.delta, "disturbance magnitude")->capture_default_str();
  app->add_option("--dt", c.dt, "integration step (s)")->capture_default_str();
  app->add_option("--t-final", c.t_final, "horizon (s)")->capture_default_str();
  app->add_option("--seed", c.seed, "seed for stochastic sampling")->capture_default_str();
  app->add_option("--out", c.out, "output directory")->capture_default_str();
  app->add_flag("--unfiltered", c.unfiltered, "apply the nominal controller only");
  app->add_option("--form", c.form, "kkt | literal decay-scale denominator")->capture_default_str();
  add_scenario_options(app, c);
}

template <class Config>
Config apply_params(Config cfg, const Common& c) {
  auto fields = cfg.fields();
  for (const auto& [k, v] : c.params) {
    auto it = fields.find(k);
    if (it == fields.end()) {
      throw UsageError("parameter --" + k + " does not apply to scenario " + c.scenario);
    }
    *it->second = v;
  }
  return cfg;
}

void check_scenario(const Common& c) {
  if (c.scenario != "pendulum" && c.scenario != "quadrotor") {
    throw UsageError("unknown scenario '" + c.scenario + "'");
  }
}

FilterOptions filter_options(const Common& c, double upper_bound) {
  FilterOptions o;
  if (c.form == "kkt") {
    o.form = DenominatorForm::kkt;
  } else if (c.form == "literal") {
    o.form = DenominatorForm::literal;
    o.upper_bound_c = upper_bound;
  } else {
    throw UsageError("unknown --form '" + c.form + "'");
  }
  return o;
}

DisturbanceSignal make_disturbance(const std::string& spec_in, double delta, Index p) {
  const std::string spec = spec_in;
  if (spec == "none") return DisturbanceSignal::zero(p);
  if (spec == "sin") {
    VectorXd dir = VectorXd::Zero(p);
    dir(0) = 1.0;
    return DisturbanceSignal::sinusoid(dir, delta, 1.0);
  }
  if (spec.rfind("dir:", 0) == 0) {
    if (p != 2) throw UsageError("dir:<angle> needs a planar disturbance");
    double angle = 0.0;
    try {
      std::size_t used = 0;
      angle = std::stod(spec.substr(4), &used);
      if (used != spec.size() - 4) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw UsageError("bad disturbance angle in '" + spec + "'");
    }
    return DisturbanceSignal::planar_direction(angle, delta);
  }
  throw UsageError("unknown disturbance '" + spec + "'");
}

RolloutConfig rollout_config(const Common& c) {
  RolloutConfig rc;
  rc.dt = c.dt;
  rc.t_final = c.t_final;
  try {
    rc.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return rc;
}

template <class F>
auto build(F&& f) {
  try {
    return f();
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw BuildError(e.what());
  }
}

// Assembles the rollout spec and initial state for the selected scenario.
struct Prepared {
  RolloutSpec spec;
  VectorXd x0;
};

Prepared prepare(const Common& c, std::optional<double> epsilon = {},
                 std::optional<std::string> disturbance = {}) {
  check_scenario(c);
  const std::string dist = disturbance.value_or(c.disturbance);
  if (c.scenario == "pendulum") {
    PendulumConfig cfg = apply_params(PendulumConfig{}, c);
    if (epsilon) cfg.epsilon = *epsilon;
    const auto s = build([&] { return build_pendulum(cfg); });
    const auto d = make_disturbance(dist.empty() ? "sin" : dist, c.delta, 1);
    return {s.rollout_spec(d, !c.unfiltered, filter_options(c, s.geometry.c)), s.x0};
  }
  QuadrotorConfig cfg = apply_params(QuadrotorConfig{}, c);
  if (epsilon) cfg.epsilon = *epsilon;
  const auto s = build([&] { return build_quadrotor(cfg); });
  const auto d = make_disturbance(dist.empty() ? "dir:0" : dist, c.delta, 2);
  return {s.rollout_spec(d, !c.unfiltered, filter_options(c, s.geometry.c)), s.x0};
}

int cmd_run(const Common& c) {
  const auto rc = rollout_config(c);
  const Prepared p = prepare(c);
  const RolloutResult r = rollout(p.spec, p.x0, rc);
  const fs::path dir(c.out);
  io::atomic_write(dir / "trajectory.csv", io::trajectory_csv(r.traj));
  io::atomic_write(dir / "trajectory.json", io::to_json(r.traj).dump() + "\n");
  json summary = io::to_json(r);
  summary["scenario"] = c.scenario;
  io::atomic_write(dir / "metrics.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return kOk;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw UsageError("bad number '" + item + "' in list");
    }
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

int cmd_sweep(const Common& c, const std::string& over, const std::string& values) {
  const auto rc = rollout_config(c);
  check_scenario(c);
  std::vector<double> grid;
  if (over == "direction") {
    grid = values.empty() ? unit_circle_angles(8) : parse_list(values);
  } else if (over == "epsilon" || over == "delta") {
    grid = values.empty() ? std::vector<double>{0.1, 1.0, 10.0} : parse_list(values);
  } else {
    throw UsageError("--over must be epsilon, delta or direction");
  }
  if (over == "direction" && c.scenario != "quadrotor") {
    throw UsageError("direction sweeps need a planar disturbance (quadrotor)");
  }
  // Build once up front so configuration errors surface as build failures.
  (void)prepare(c);
  const auto cells = sweep(grid, [&](double v) {
    Common cc = c;
    if (over == "delta") cc.delta = v;
    const Prepared p =
        over == "epsilon"     ? prepare(cc, v)
        : over == "direction" ? prepare(cc, {}, "dir:" + io::format_double(v))
                              : prepare(cc);
    return rollout(p.spec, p.x0, rc);
  });
  std::ostringstream table;
  table << over << ",min_h,min_layer_h,max_violation,gamma,issf_bound_satisfied,theta_floor_ok,error\n";
  json rows = json::array();
  for (const auto& cell : cells) {
    table << io::format_double(cell.value);
    if (cell.ok()) {
      const auto& m = cell.result->metrics;
      table << ',' << io::format_double(m.min_h) << ',' << io::format_double(m.min_layer_h) << ','
            << io::format_double(m.max_violation) << ',' << io::format_double(m.gamma) << ','
            << m.issf_bound_satisfied << ',' << m.theta_floor_ok << ',' << cell.result->diagnostic
            << '\n';
      json row = io::to_json(*cell.result);
      row["value"] = cell.value;
      rows.push_back(row);
    } else {
      table << ",,,,,,," << cell.error << '\n';
      rows.push_back({{"value", cell.value}, {"error", cell.error}});
    }
  }
  const fs::path dir(c.out);
  io::atomic_write(dir / "sweep.csv", table.str());
  io::atomic_write(dir / "sweep.json", json{{"over", over}, {"cells", rows}}.dump(2) + "\n");
  std::cout << table.str();
  return kOk;
}

struct VerifyArgs {
  std::size_t samples = 100000;
  std::size_t projection_seeds = 5000;
  std::size_t rays = 200;
  // Checked ε; defaults to the scenario's (the one used for synthesis).
  std::optional<double> check_epsilon;
};

VerifyOptions verify_options(const SafeSetGeometry& g, const Common& c, const VerifyArgs& va) {
  VerifyOptions o;
  o.box_lower = *g.box_lower;
  o.box_upper = *g.box_upper;
  o.samples = va.samples;
  o.projection_seeds = va.projection_seeds;
  o.seed = c.seed;
  return o;
}

int cmd_verify(const Common& c, const VerifyArgs& va) {
  check_scenario(c);
  json checks = json::array();
  bool failed = false;
  auto add = [&](const SampleReport& rep) {
    failed = failed || rep.verdict == Verdict::fail;
    checks.push_back(io::to_json(rep));
  };
  json extra;

  if (c.scenario == "pendulum") {
    const PendulumConfig cfg = apply_params(PendulumConfig{}, c);
    const auto s = build([&] { return build_pendulum(cfg); });
    add(check_prop1(s.layer1, s.layer_barrier, s.layer_geometry,
                    verify_options(s.layer_geometry, c, va)));
    const BarrierSpec checked = s.barrier.with_epsilon(va.check_epsilon.value_or(cfg.epsilon));
    add(check_od_issf(s.full, checked, s.geometry, verify_options(s.geometry, c, va)));
    RayOptions ro;
    ro.center = VectorXd::Zero(2);
    ro.rays = va.rays;
    ro.seed = c.seed;
    add(check_regular_values(s.barrier, s.geometry, {0.0, -0.5}, ro));
    BoxSampler sampler(*s.geometry.box_lower, *s.geometry.box_upper, c.seed);
    std::vector<VectorXd> pts;
    for (int k = 0; k < 1000; ++k) pts.push_back(sampler.draw());
    std::vector<VectorXd> pts1;
    for (const auto& x : pts) pts1.push_back(x.head(1));
    const auto m1 = check_matched(s.layer1, pts1);
    const auto mf = check_matched(s.full, pts);
    extra["matched"] = {{"layer1", m1.all_matched}, {"full", mf.all_matched},
                        {"layer1_max_residual", m1.max_residual},
                        {"full_max_residual", mf.max_residual}};
  } else {
    const QuadrotorConfig cfg = apply_params(QuadrotorConfig{}, c);
    const auto s = build([&] { return build_quadrotor(cfg); });
    add(check_prop1(s.top, s.wall_barrier, s.top_geometry, verify_options(s.top_geometry, c, va)));
    const BarrierSpec checked = s.barrier.with_epsilon(va.check_epsilon.value_or(cfg.epsilon));
    add(check_od_issf(s.partial, checked, s.geometry, verify_options(s.geometry, c, va)));
    RayOptions ro;
    ro.center = s.drd.lift(VectorXd::Zero(4));
    ro.rays = va.rays;
    ro.seed = c.seed;
    add(check_regular_values(s.barrier, s.geometry, {0.0, -0.5}, ro));
    BoxSampler sampler(*s.top_geometry.box_lower, *s.top_geometry.box_upper, c.seed);
    double worst_alignment = 0.0;
    std::vector<VectorXd> etas;
    for (int k = 0; k < 1000; ++k) {
      const VectorXd z = sampler.draw();
      const VectorXd v = s.k_v(Vec<double>(z));
      const VectorXd eta = s.drd.desired_eta(Vec<double>(z));
      worst_alignment = std::max(worst_alignment, alignment_residual(s.model.psi_at(eta), v));
      etas.push_back(eta);
    }
    const auto rank = check_row_rank(
        [&s](const VectorXd& eta) { return s.model.bottom.input_matrix(Vec<double>(eta)); }, etas);
    failed = failed || worst_alignment > 1e-9 || !rank.passed();
    extra["alignment_max_residual"] = worst_alignment;
    extra["bottom_row_rank_ok"] = rank.passed();
  }

  json report = {{"scenario", c.scenario},
                 {"verdict", failed ? "fail" : "pass"},
                 {"evidence", "numerical evidence"},
                 {"checks", checks}};
  report.update(extra);
  const fs::path path = fs::path(c.out) / "verify.json";
  io::atomic_write(path, report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  if (failed) {
    std::cerr << "verification failed; report at " << path.string() << "\n";
    return kVerifyFail;
  }
  return kOk;
}

std::string segments_csv(const std::vector<LevelCurve>& curves) {
  std::ostringstream os;
  os << "delta,gamma,q_a,qdot_a,q_b,qdot_b\n";
  for (const auto& c : curves) {
    for (const auto& s : c.segments) {
      os << io::format_double(c.delta) << ',' << io::format_double(c.gamma) << ','
         << io::format_double(s.a[0]) << ',' << io::format_double(s.a[1]) << ','
         << io::format_double(s.b[0]) << ',' << io::format_double(s.b[1]) << '\n';
    }
  }
  return os.str();
}

int cmd_plotdata(const Common& c, const std::string& deltas_s, const std::string& eps_s, int grid_n) {
  check_scenario(c);
  const auto rc = rollout_config(c);
  const fs::path dir(c.out);
  if (c.scenario == "pendulum") {
    const PendulumConfig cfg = apply_params(PendulumConfig{}, c);
    const auto s = build([&] { return build_pendulum(cfg); });
    std::vector<double> deltas = {0.0};
    for (double d : parse_list(deltas_s)) deltas.push_back(d);
    const auto curves = inflated_boundaries(s, deltas, default_pendulum_grid(grid_n));
    io::atomic_write(dir / "pendulum_safe_sets.csv", segments_csv(curves));

    const auto runs = pendulum_epsilon_runs(cfg, parse_list(eps_s), rc, c.delta);
    std::ostringstream os;
    os << "t";
    for (const auto& r : runs) os << ",q_eps_" << io::format_double(r.epsilon);
    os << '\n';
    std::size_t rows = runs.front().result.traj.size();
    for (const auto& r : runs) rows = std::min(rows, r.result.traj.size());
    for (std::size_t k = 0; k < rows; ++k) {
      os << io::format_double(runs.front().result.traj.times[k]);
      for (const auto& r : runs) os << ',' << io::format_double(r.result.traj.states[k](0));
      os << '\n';
    }
    io::atomic_write(dir / "pendulum_q.csv", os.str());
    std::cout << "wrote " << (dir / "pendulum_safe_sets.csv").string() << ", "
              << (dir / "pendulum_q.csv").string() << "\n";
    return kOk;
  }

  const QuadrotorConfig cfg = apply_params(QuadrotorConfig{}, c);
  const auto s = build([&] { return build_quadrotor(cfg); });
  const auto base = make_disturbance(c.disturbance.empty() ? "dir:0" : c.disturbance, c.delta, 2);
  const auto r = rollout(s.rollout_spec(base), s.x0, rc);
  std::ostringstream os;
  os << "t,x,y,theta,eta_d\n";
  for (std::size_t k = 0; k < r.traj.size(); ++k) {
    const VectorXd& x = r.traj.states[k];
    os << io::format_double(r.traj.times[k]) << ',' << io::format_double(x(0)) << ','
       << io::format_double(x(1)) << ',' << io::format_double(x(4)) << ','
       << io::format_double(s.eta_d(x)) << '\n';
  }
  io::atomic_write(dir / "quadrotor_attitude.csv", os.str());

  const auto angles = unit_circle_angles(8);
  const auto cells = sweep(angles, [&](double a) {
    return rollout(s.rollout_spec(DisturbanceSignal::planar_direction(a, c.delta)), s.x0, rc);
  });
  std::ostringstream tr;
  tr << "angle,t,x,y\n";
  for (const auto& cell : cells) {
    if (!cell.ok()) throw Error("direction " + io::format_double(cell.value) + ": " + cell.error);
    const auto& t = cell.result->traj;
    for (std::size_t k = 0; k < t.size(); ++k) {
      tr << io::format_double(cell.value) << ',' << io::format_double(t.times[k]) << ','
         << io::format_double(t.states[k](0)) << ',' << io::format_double(t.states[k](1)) << '\n';
    }
  }
  io::atomic_write(dir / "quadrotor_traces.csv", tr.str());
  std::cout << "wrote " << (dir / "quadrotor_attitude.csv").string() << ", "
            << (dir / "quadrotor_traces.csv").string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal-decay ISSf safety filters: simulation, sweeps and verification"};
  app.set_config("--config", "", "read options from an INI file ([run], [sweep], ... sections)");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  Common run_c, sweep_c, verify_c, plot_c;
  auto* run = app.add_subcommand("run", "single closed-loop rollout");
  add_common(run, run_c);

  auto* sw = app.add_subcommand("sweep", "rollouts over a parameter grid");
  add_common(sw, sweep_c);
  std::string over = "epsilon", values;
  sw->add_option("--over", over, "epsilon | delta | direction")->capture_default_str();
  sw->add_option("--values", values, "comma-separated grid (direction: angles in rad)");

  auto* ver = app.add_subcommand("verify", "sampling-based barrier verification");
  add_common(ver, verify_c);
  VerifyArgs va;
  ver->add_option("--samples", va.samples, "samples in D \\ Int(S)")->capture_default_str();
  ver->add_option("--projection-seeds", va.projection_seeds, "seeds for zero-set projection")
      ->capture_default_str();
  ver->add_option("--check-epsilon", va.check_epsilon,
                  "epsilon in the checked condition (default: the synthesis epsilon)");
  ver->add_option("--rays", va.rays, "rays per level for regular-value tracing")->capture_default_str();

  auto* plot = app.add_subcommand("plotdata", "emit figure data series");
  add_common(plot, plot_c);
  std::string deltas = "0.25,0.5,1.0", epsilons = "0.1,1,10";
  int grid_n = 241;
  plot->add_option("--deltas", deltas, "disturbance bounds for S_delta boundaries")->capture_default_str();
  plot->add_option("--epsilons", epsilons, "epsilon values for q(t) series")->capture_default_str();
  plot->add_option("--grid", grid_n, "grid nodes per axis")->capture_default_str()->check(CLI::Range(3, 5000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (run->parsed()) return cmd_run(run_c);
    if (sw->parsed()) return cmd_sweep(sweep_c, over, values);
    if (ver->parsed()) return cmd_verify(verify_c, va);
    if (plot->parsed()) return cmd_plotdata(plot_c, deltas, epsilons, grid_n);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const BuildError& e) {
    std::cerr << "scenario build failed: " << e.what() << "\n";
    return kBuild;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
