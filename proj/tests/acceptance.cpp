// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "filter_instances.hpp"
#include "odcbf/scenarios/plotdata.hpp"
#include "odcbf/verify.hpp"

using namespace odcbf;
using namespace odcbf::scenarios;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Detail {
 public:
  template <class T>
  Detail& operator<<(const T& v) {
    os_ << v;
    return *this;
  }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// One-state system with h(x) = x and α = identity, so a filter call at
// x = α(h) sees exactly the requested Lie data.
struct LieProbe {
  DisturbedSystem sys;
  BarrierSpec bar;
  VectorXd x;
};

LieProbe probe_for(const testing::FilterInstance& f) {
  LieProbe p;
  const Index m = f.lg_h.size(), pd = f.lw_h.size();
  p.sys.n = 1;
  p.sys.m = m;
  p.sys.p = pd;
  p.sys.f = [lf = f.lf_h](const VectorXd&) { return VectorXd::Constant(1, lf); };
  p.sys.g = [lg = f.lg_h](const VectorXd&) { return MatrixXd(lg.transpose()); };
  p.sys.w = [lw = f.lw_h](const VectorXd&) { return MatrixXd(lw.transpose()); };
  p.bar.n = 1;
  p.bar.h = [](const VectorXd& x) { return x(0); };
  p.bar.grad_h = [](const VectorXd&) { return VectorXd::Ones(1); };
  p.bar.alpha = ExtendedClassK::linear(1.0);
  p.bar.epsilon = f.epsilon;
  p.bar.theta_d = f.theta_d;
  p.bar.p_weight = f.p;
  p.x = VectorXd::Constant(1, f.alpha_h);
  return p;
}

Outcome criterion_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  double max_du = 0.0, max_dw = 0.0;
  int mismatches = 0, floor_violations = 0, infeasible = 0;
  int per_case[8] = {};
  const int total = 10000;
  for (int k = 0; k < total; ++k) {
    const int c = k % 8;
    const auto f = testing::random_instance(rng, c);
    const LieProbe pr = probe_for(f);
    const auto oracle = qp_oracle(f.lf_h, f.lg_h, f.lw_h, f.alpha_h, f.epsilon, f.theta_d, f.p, f.k_d);
    try {
      const FilterResult r = od_issf_filter(pr.sys, pr.bar, f.k_d, pr.x);
      if (!oracle.feasible) {
        ++mismatches;
        continue;
      }
      const double du = (r.u - oracle.u).norm() / std::max(1.0, oracle.u.norm());
      const double dw = std::abs(r.theta_x - oracle.omega) / std::max(1.0, std::abs(oracle.omega));
      max_du = std::max(max_du, du);
      max_dw = std::max(max_dw, dw);
      if (du > 1e-8 || dw > 1e-8) ++mismatches;
      if (r.theta_x < f.theta_d) ++floor_violations;
      ++per_case[c];
    } catch (const InfeasiblePointError&) {
      ++infeasible;
      if (oracle.feasible) ++mismatches;
    }
  }
  const double secs = seconds_since(t0);
  bool all_cases = true;
  for (int c = 0; c < 8; ++c) {
    if (!testing::infeasible_case(c) && per_case[c] == 0) all_cases = false;
  }
  Outcome o;
  o.pass = mismatches == 0 && floor_violations == 0 && all_cases && secs < 10.0;
  o.detail = (Detail() << total << " instances, max rel diff u " << max_du << ", theta " << max_dw
                       << ", infeasible " << infeasible << ", theta floor violations "
                       << floor_violations << ", " << secs << " s")
                 .str();
  return o;
}

Outcome criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto pend = build_pendulum({});
  const auto quad = build_quadrotor({});
  struct Case {
    const char* name;
    const BarrierSpec* bar;
    const SafeSetGeometry* geom;
  };
  const Case cases[] = {{"pendulum layer", &pend.layer_barrier, &pend.layer_geometry},
                        {"pendulum composite", &pend.barrier, &pend.geometry},
                        {"quadrotor wall", &quad.wall_barrier, &quad.top_geometry},
                        {"quadrotor DRD", &quad.barrier, &quad.geometry}};
  Detail d;
  bool ok = true;
  for (const Case& c : cases) {
    BoxSampler s(*c.geom->box_lower, *c.geom->box_upper, 7);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) worst = std::max(worst, gradient_check(*c.bar, s.draw()));
    ok = ok && worst <= 1e-6;
    d << c.name << " " << worst << "; ";
  }
  const double secs = seconds_since(t0);
  d << secs << " s";
  return {ok && secs < 30.0, d.str()};
}

VerifyOptions box_options(const SafeSetGeometry& g) {
  VerifyOptions o;
  o.box_lower = *g.box_lower;
  o.box_upper = *g.box_upper;
  return o;
}

Outcome criterion_pendulum_zero_set() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto sc = build_pendulum({});
  const auto r = check_od_issf(sc.full, sc.barrier, sc.geometry, box_options(sc.geometry));
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = r.verdict == Verdict::pass && r.hits >= 100 && r.min_margin > 0.0 && secs < 60.0;
  o.detail = (Detail() << "verdict " << to_string(r.verdict) << ", zero-set points " << r.hits
                       << ", min margin " << r.min_margin << ", " << secs << " s")
                 .str();
  return o;
}

Outcome criterion_quadrotor_zero_set() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto sc = build_quadrotor({});
  const auto r = check_od_issf(sc.partial, sc.barrier, sc.geometry, box_options(sc.geometry));
  BoxSampler s(*sc.top_geometry.box_lower, *sc.top_geometry.box_upper, 11);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const VectorXd z = s.draw();
    const VectorXd v = sc.k_v(Vec<double>(z));
    const VectorXd eta = sc.drd.desired_eta(Vec<double>(z));
    worst = std::max(worst, alignment_residual(sc.model.psi_at(eta), v));
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = r.verdict == Verdict::pass && r.hits >= 100 && r.min_margin > 0.0 && worst <= 1e-9 &&
           secs < 60.0;
  o.detail = (Detail() << "verdict " << to_string(r.verdict) << ", zero-set points " << r.hits
                       << ", min margin " << r.min_margin << ", max alignment residual " << worst
                       << ", " << secs << " s")
                 .str();
  return o;
}

Outcome criterion_pendulum_epsilon() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> eps = {0.1, 1.0, 10.0};
  RolloutConfig rc;
  RolloutConfig half = rc;
  half.dt = rc.dt / 2;
  const auto runs = pendulum_epsilon_runs({}, eps, rc);
  const auto fine = pendulum_epsilon_runs({}, eps, half);
  const double secs = seconds_since(t0);

  const auto& m01 = runs[0].result.metrics;
  const auto& m10 = runs[2].result.metrics;
  const double gamma1 = 10.0 / 2.0;
  double worst_shift = 0.0;
  bool monotone = true, complete = true;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    worst_shift = std::max(worst_shift, std::abs(runs[i].result.metrics.min_h - fine[i].result.metrics.min_h));
    if (i > 0) monotone = monotone && runs[i].result.metrics.min_h <= runs[i - 1].result.metrics.min_h;
    complete = complete && !runs[i].result.truncated && !fine[i].result.truncated;
  }
  Outcome o;
  o.pass = m01.min_layer_h >= 0.0 && m10.min_layer_h < 0.0 && m10.min_h >= -gamma1 - 1e-3 &&
           worst_shift < 1e-4 && monotone && complete && secs / 6.0 < 60.0;
  o.detail = (Detail() << "min h1 (eps 0.1) " << m01.min_layer_h << ", min h1 (eps 10) "
                       << m10.min_layer_h << ", min h (eps 10) " << m10.min_h << " vs -gamma "
                       << -gamma1 << ", dt-halving shift " << worst_shift << ", min h by eps "
                       << runs[0].result.metrics.min_h << " " << runs[1].result.metrics.min_h << " "
                       << runs[2].result.metrics.min_h << ", " << secs << " s for 6 rollouts")
                 .str();
  return o;
}

// Distance from p to {h = −γ} sampled as rows (q, lower branch, upper branch).
double distance_to_closed_form(const std::vector<std::array<double, 3>>& curve,
                               const std::array<double, 2>& p) {
  double best = INFINITY;
  for (const auto& c : curve) {
    best = std::min(best, std::hypot(p[0] - c[0], p[1] - c[1]));
    best = std::min(best, std::hypot(p[0] - c[0], p[1] - c[2]));
  }
  return best;
}

Outcome criterion_inflated_sets() {
  const auto sc = build_pendulum({});
  const Grid2 grid = default_pendulum_grid();
  const std::vector<double> deltas = {0.25, 0.5, 1.0};
  const auto curves = inflated_boundaries(sc, deltas, grid);
  const double resolution = std::hypot(grid.dx(), grid.dy());
  bool nested = true, matched = true, nonempty = true;
  double worst = 0.0;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& c = curves[i];
    nonempty = nonempty && !c.segments.empty();
    if (i + 1 < curves.size()) nested = nested && c.gamma < curves[i + 1].gamma;
    const double qmax = std::sqrt(1.0 + c.gamma);
    std::vector<std::array<double, 3>> curve;
    const int samples = 20001;
    for (int k = 0; k < samples; ++k) {
      const double q = -qmax + 2.0 * qmax * k / (samples - 1);
      const auto br = inflated_boundary_branches(sc, q, c.gamma);
      curve.push_back({q, br[0], br[1]});
    }
    for (const auto& seg : c.segments) {
      for (const auto& p : {seg.a, seg.b}) {
        worst = std::max(worst, distance_to_closed_form(curve, p));
        // Strict nesting: boundary of S_δi lies in the interior of S_δj, j > i.
        VectorXd x(2);
        x << p[0], p[1];
        const double h = sc.barrier.value(x);
        for (std::size_t j = i + 1; j < curves.size(); ++j) nested = nested && h > -curves[j].gamma;
        for (std::size_t j = 0; j < i; ++j) nested = nested && h < -curves[j].gamma;
      }
    }
  }
  matched = worst <= resolution;
  Outcome o;
  o.pass = nested && matched && nonempty;
  o.detail = (Detail() << "gammas " << curves[0].gamma << " " << curves[1].gamma << " "
                       << curves[2].gamma << ", nested " << (nested ? "yes" : "no")
                       << ", max distance to closed form " << worst << " (grid diagonal "
                       << resolution << ")")
                 .str();
  return o;
}

struct QuadRun {
  double max_x = -INFINITY;
  double min_h = INFINITY;
  double near_wall_error = 0.0;  // max |θ − η_d| over the final second within 0.1 m of the wall
  bool near_wall = false;
  double final_error = 0.0;
  bool truncated = false;
};

QuadRun run_quadrotor(double epsilon, const DisturbanceSignal& d) {
  QuadrotorConfig cfg;
  cfg.epsilon = epsilon;
  const auto sc = build_quadrotor(cfg);
  const auto r = rollout(sc.rollout_spec(d), sc.x0, RolloutConfig{});
  QuadRun q;
  q.truncated = r.truncated;
  q.min_h = r.metrics.min_h;
  const double t_end = r.traj.times.back();
  for (std::size_t k = 0; k < r.traj.size(); ++k) {
    const VectorXd& x = r.traj.states[k];
    q.max_x = std::max(q.max_x, x(0));
    if (x(0) >= cfg.x_max - 0.1 && r.traj.times[k] >= t_end - 1.0) {
      q.near_wall = true;
      q.near_wall_error = std::max(q.near_wall_error, std::abs(x(4) - sc.eta_d(x)));
    }
  }
  const VectorXd& xf = r.traj.states.back();
  q.final_error = std::abs(xf(4) - sc.eta_d(xf));
  return q;
}

Outcome criterion_quadrotor_runs() {
  const auto t0 = std::chrono::steady_clock::now();
  const double x_max = QuadrotorConfig{}.x_max;
  const auto push = DisturbanceSignal::planar_direction(0.0);
  const QuadRun safe = run_quadrotor(1.0, push);
  const QuadRun loose = run_quadrotor(50.0, push);
  const auto angles = unit_circle_angles(8);
  const auto cells = sweep(angles, [](double a) {
    const auto sc = build_quadrotor({});
    return rollout(sc.rollout_spec(DisturbanceSignal::planar_direction(a)), sc.x0, RolloutConfig{});
  });
  int violations = 0, failed = 0;
  double sweep_max_x = -INFINITY;
  for (const auto& c : cells) {
    if (!c.ok() || c.result->truncated) {
      ++failed;
      continue;
    }
    for (const auto& x : c.result->traj.states) sweep_max_x = std::max(sweep_max_x, x(0));
    if (c.result->metrics.min_h < -1e-6) ++violations;
  }
  if (sweep_max_x > x_max + 1e-9) ++violations;
  const double attitude_error = safe.near_wall ? safe.near_wall_error : safe.final_error;
  Outcome o;
  o.pass = !safe.truncated && safe.max_x <= x_max + 1e-9 && loose.max_x > x_max && violations == 0 &&
           failed == 0 && attitude_error < 0.1;
  o.detail = (Detail() << "max x (eps 1) " << safe.max_x << ", max x (eps 50) " << loose.max_x
                       << ", 8-direction sweep max x " << sweep_max_x << " with " << violations
                       << " violations and " << failed << " failed cells, |theta - eta_d| near wall "
                       << attitude_error << (safe.near_wall ? "" : " (terminal)") << ", "
                       << seconds_since(t0) << " s")
                 .str();
  return o;
}

// ẋ = f(x) + g(x)u + g(x)φ(x)d on R³ with one input: matched by construction.
struct MatchedModel {
  Index state_dim() const { return 3; }
  Index input_dim() const { return 1; }
  Index disturbance_dim() const { return 2; }
  template <class T>
  Vec<T> drift(const Vec<T>& x) const {
    using std::sin;
    Vec<T> out(3);
    out << x(1), T(sin(x(0))), T(-x(2) + x(0) * x(1));
    return out;
  }
  template <class T>
  Mat<T> input_matrix(const Vec<T>& x) const {
    Mat<T> out(3, 1);
    out << T(0.5 * x(1)), T(0.0), T(1.0 + x(0) * x(0));
    return out;
  }
  template <class T>
  Mat<T> disturbance_matrix(const Vec<T>& x) const {
    using std::cos;
    Mat<T> phi(1, 2);
    phi << T(cos(x(2))), T(0.3 + x(1));
    return input_matrix(x) * phi;
  }
};

struct MatchedBarrier {
  template <class T>
  T operator()(const Vec<T>& x) const {
    return T(1.0 - x(0) * x(0) - 0.5 * x(1) * x(1) - x(2) * x(2) + 0.4 * x(0) * x(2));
  }
};

Outcome criterion_matched() {
  const auto sc = build_pendulum({});
  std::vector<VectorXd> s1, s2;
  BoxSampler b1(*sc.layer_geometry.box_lower, *sc.layer_geometry.box_upper, 3);
  BoxSampler b2(*sc.geometry.box_lower, *sc.geometry.box_upper, 4);
  for (int k = 0; k < 1000; ++k) {
    s1.push_back(b1.draw());
    s2.push_back(b2.draw());
  }
  const auto layer = check_matched(sc.layer1, s1);
  const auto full = check_matched(sc.full, s2);

  const DisturbedSystem sys = to_system(MatchedModel{});
  const BarrierSpec bar = make_barrier_spec(MatchedBarrier{}, 3, ExtendedClassK::linear(1.0), 1.0, 1.0, 1.0);
  BoxSampler b3(VectorXd::Constant(3, -2.0), VectorXd::Constant(3, 2.0), 5);
  std::vector<VectorXd> seeds;
  for (int k = 0; k < 1000; ++k) seeds.push_back(b3.draw());
  const auto synthetic_class = check_matched(sys, seeds);
  const auto impl = check_matched_implication(sys, bar, seeds);

  Outcome o;
  o.pass = layer.all_matched && !full.all_matched && synthetic_class.all_matched &&
           impl.verdict == Verdict::pass && impl.hits >= 1000;
  o.detail = (Detail() << "pendulum layer 1 " << (layer.all_matched ? "matched" : "unmatched")
                       << " (max residual " << layer.max_residual << "), full pendulum "
                       << (full.all_matched ? "matched" : "unmatched") << " (max residual "
                       << full.max_residual << "), synthetic implication " << to_string(impl.verdict)
                       << " at " << impl.hits << "/" << impl.samples_checked
                       << " zero-set points, worst slack " << impl.min_margin)
                 .str();
  return o;
}

Outcome criterion_zero_disturbance() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto pend = build_pendulum({});
  const auto quad = build_quadrotor({});
  double worst_p = INFINITY, worst_q = INFINITY;
  bool interior = true, complete = true;

  std::vector<VectorXd> pend_starts = {pend.x0}, quad_starts = {quad.x0};
  BoxSampler bp(*pend.geometry.box_lower, *pend.geometry.box_upper, 21);
  while (pend_starts.size() < 4) {
    VectorXd x = bp.draw();
    if (pend.barrier.value(x) > 0.05) pend_starts.push_back(x);
  }
  BoxSampler bq(*quad.geometry.box_lower, *quad.geometry.box_upper, 22);
  while (quad_starts.size() < 4) {
    VectorXd x = bq.draw();
    if (quad.barrier.value(x) > 0.05) quad_starts.push_back(x);
  }
  for (const auto& x0 : pend_starts) {
    interior = interior && pend.barrier.value(x0) > 0.0;
    const auto r = rollout(pend.rollout_spec(DisturbanceSignal::zero(1)), x0, RolloutConfig{});
    complete = complete && !r.truncated;
    worst_p = std::min(worst_p, r.metrics.min_h);
  }
  for (const auto& x0 : quad_starts) {
    interior = interior && quad.barrier.value(x0) > 0.0;
    const auto r = rollout(quad.rollout_spec(DisturbanceSignal::zero(2)), x0, RolloutConfig{});
    complete = complete && !r.truncated;
    worst_q = std::min(worst_q, r.metrics.min_h);
  }
  Outcome o;
  o.pass = interior && complete && worst_p >= -1e-6 && worst_q >= -1e-6;
  o.detail = (Detail() << "min h pendulum " << worst_p << ", quadrotor " << worst_q << " over "
                       << pend_starts.size() + quad_starts.size() << " interior starts, "
                       << seconds_since(t0) << " s")
                 .str();
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"closed form matches QP oracle", criterion_oracle},
      {"barrier gradients match central differences", criterion_gradients},
      {"pendulum zero-set margin positive", criterion_pendulum_zero_set},
      {"quadrotor zero-set margin positive and aligned", criterion_quadrotor_zero_set},
      {"pendulum robustness trend", criterion_pendulum_epsilon},
      {"inflated safe sets nested and exact", criterion_inflated_sets},
      {"quadrotor wall and attitude", criterion_quadrotor_runs},
      {"matched classification", criterion_matched},
      {"zero-disturbance invariance", criterion_zero_disturbance},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] criterion %zu: %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
