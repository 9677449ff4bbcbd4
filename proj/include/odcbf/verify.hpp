#pragma once

// Sampling-based verification of barrier conditions.
//
// Every verdict here is numerical evidence over seeded samples, not a proof.
// A check that never reaches the region its condition ranges over reports
// vacuous_pass, which is distinct from pass.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/LU>
#include <Eigen/QR>

#include "odcbf/autodiff.hpp"
#include "odcbf/barrier.hpp"
#include "odcbf/dynamics.hpp"

namespace odcbf {

enum class Verdict { pass, fail, vacuous_pass };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::vacuous_pass: return "vacuous_pass";
  }
  return "unknown";
}

struct Counterexample {
  VectorXd state;
  double margin = 0.0;
};

struct SampleReport {
  std::string check;
  std::size_t samples_checked = 0;
  // Points where the condition under test was actually evaluated (for
  // zero-set checks, points with ‖L_g h‖ <= rank tolerance).
  std::size_t hits = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  std::vector<Counterexample> violations;  // worst first
  Verdict verdict = Verdict::vacuous_pass;

  void record(const VectorXd& x, double margin, double threshold) {
    ++hits;
    min_margin = std::min(min_margin, margin);
    if (!(margin > threshold)) violations.push_back({x, margin});
  }

  void finalize(std::size_t max_counterexamples = 20) {
    std::stable_sort(violations.begin(), violations.end(),
                     [](const Counterexample& a, const Counterexample& b) {
                       if (a.margin != b.margin) return a.margin < b.margin;
                       return std::lexicographical_compare(a.state.data(),
                                                           a.state.data() + a.state.size(),
                                                           b.state.data(),
                                                           b.state.data() + b.state.size());
                     });
    if (violations.size() > max_counterexamples) violations.resize(max_counterexamples);
    if (!violations.empty()) {
      verdict = Verdict::fail;
    } else {
      verdict = hits == 0 ? Verdict::vacuous_pass : Verdict::pass;
    }
  }
};

// Associative, order-independent merge of batch reports.
inline SampleReport merge(SampleReport a, const SampleReport& b) {
  a.samples_checked += b.samples_checked;
  a.hits += b.hits;
  a.min_margin = std::min(a.min_margin, b.min_margin);
  a.violations.insert(a.violations.end(), b.violations.begin(), b.violations.end());
  a.finalize(std::max(a.violations.size(), std::size_t{1}));
  return a;
}

// ---------------------------------------------------------------------------
// QP oracle

struct QpOracleResult {
  bool feasible = false;
  VectorXd u;
  double omega = 0.0;
  double objective = std::numeric_limits<double>::infinity();
  // Bit 0: barrier constraint active, bit 1: ω >= θ_d active.
  int active_set = 0;
};

// Solves min ½‖u − k_d‖² + ½p(ω − θ_d)²
//   s.t. L_f h + L_g h·u + ω α(h) − ‖L_w h‖²/ε >= 0,  ω >= θ_d
// by enumerating the four active sets, solving each equality-constrained KKT
// system, and keeping the primal/dual-feasible point of least objective.
inline QpOracleResult qp_oracle(double lf_h, const VectorXd& lg_h, const VectorXd& lw_h,
                                double alpha_h, double epsilon, double theta_d, double p_weight,
                                const VectorXd& k_d, double tol = 1e-10) {
  if (!(epsilon > 0.0 && theta_d > 0.0 && p_weight > 0.0)) {
    throw ParameterError("qp_oracle: epsilon, theta_d and p must be positive");
  }
  const Index m = k_d.size();
  const Index nz = m + 1;
  // z = (u, ω); objective ½zᵀHz + qᵀz + const.
  MatrixXd H = MatrixXd::Identity(nz, nz);
  H(m, m) = p_weight;
  VectorXd q(nz);
  q.head(m) = -k_d;
  q(m) = -p_weight * theta_d;
  // Constraints C z >= d.
  MatrixXd C = MatrixXd::Zero(2, nz);
  C.block(0, 0, 1, m) = lg_h.transpose();
  C(0, m) = alpha_h;
  C(1, m) = 1.0;
  VectorXd rhs(2);
  rhs << lw_h.squaredNorm() / epsilon - lf_h, theta_d;

  const double scale = 1.0 + std::abs(lf_h) + lg_h.norm() * (1.0 + k_d.norm()) +
                       std::abs(alpha_h) * theta_d + lw_h.squaredNorm() / epsilon;

  QpOracleResult best;
  for (int mask = 0; mask < 4; ++mask) {
    std::vector<Index> act;
    for (Index i = 0; i < 2; ++i) {
      if (mask & (1 << i)) act.push_back(i);
    }
    const Index na = static_cast<Index>(act.size());
    MatrixXd K = MatrixXd::Zero(nz + na, nz + na);
    VectorXd b(nz + na);
    K.topLeftCorner(nz, nz) = H;
    b.head(nz) = -q;
    for (Index j = 0; j < na; ++j) {
      K.block(0, nz + j, nz, 1) = -C.row(act[j]).transpose();
      K.block(nz + j, 0, 1, nz) = C.row(act[j]);
      b(nz + j) = rhs(act[j]);
    }
    Eigen::FullPivLU<MatrixXd> lu(K);
    if (!lu.isInvertible()) continue;
    const VectorXd sol = lu.solve(b);
    const VectorXd z = sol.head(nz);
    bool ok = true;
    for (Index j = 0; j < na; ++j) {
      if (sol(nz + j) < -tol) ok = false;  // multipliers of >= constraints
    }
    const VectorXd slack = C * z - rhs;
    if (slack(0) < -tol * scale || slack(1) < -tol * (1.0 + theta_d)) ok = false;
    if (!ok) continue;
    const double obj = 0.5 * (z.head(m) - k_d).squaredNorm() +
                       0.5 * p_weight * (z(m) - theta_d) * (z(m) - theta_d);
    if (obj < best.objective) {
      best.feasible = true;
      best.u = z.head(m);
      best.omega = z(m);
      best.objective = obj;
      best.active_set = mask;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Sampling

struct BoxSampler {
  VectorXd lower;
  VectorXd upper;
  std::mt19937_64 rng;

  BoxSampler(VectorXd lo, VectorXd hi, std::uint64_t seed)
      : lower(std::move(lo)), upper(std::move(hi)), rng(seed) {
    if (lower.size() != upper.size()) throw ShapeError("sampler box bounds differ in dimension");
    if (((upper - lower).array() < 0.0).any()) throw ParameterError("sampler box is empty");
  }

  VectorXd draw() {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    VectorXd x(lower.size());
    for (Index i = 0; i < x.size(); ++i) x(i) = lower(i) + unit(rng) * (upper(i) - lower(i));
    return x;
  }

  // Rejection sampling; returns fewer than `count` if attempts run out.
  std::vector<VectorXd> draw_where(const std::function<bool(const VectorXd&)>& accept,
                                   std::size_t count, std::size_t max_attempts) {
    std::vector<VectorXd> out;
    out.reserve(count);
    for (std::size_t k = 0; k < max_attempts && out.size() < count; ++k) {
      VectorXd x = draw();
      if (accept(x)) out.push_back(std::move(x));
    }
    return out;
  }
};

// Gauss–Newton projection onto {r(x) = 0} with minimum-norm steps and a
// finite-difference Jacobian. Returns the converged point, if any.
struct ProjectionOptions {
  int max_iters = 60;
  double tol = 1e-12;
  double fd_step = 1e-7;
};

inline std::optional<VectorXd> project_to_zero_set(
    const std::function<VectorXd(const VectorXd&)>& residual, VectorXd x,
    const ProjectionOptions& opts = {}) {
  VectorXd r = residual(x);
  double rn = r.norm();
  for (int it = 0; it < opts.max_iters; ++it) {
    if (!std::isfinite(rn)) return std::nullopt;
    if (rn <= opts.tol) return x;
    const MatrixXd J = fd::jacobian(residual, x, opts.fd_step);
    const VectorXd step = J.completeOrthogonalDecomposition().solve(-r);
    double t = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 30; ++ls) {
      const VectorXd xn = x + t * step;
      const VectorXd rn_vec = residual(xn);
      const double nn = rn_vec.norm();
      if (std::isfinite(nn) && nn < rn) {
        x = xn;
        r = rn_vec;
        rn = nn;
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) break;
  }
  if (rn <= opts.tol) return x;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Barrier-condition checks

struct VerifyOptions {
  VectorXd box_lower;
  VectorXd box_upper;
  std::size_t samples = 100000;
  // Samples used as seeds for zero-set projection (first N of `samples`).
  std::size_t projection_seeds = 5000;
  std::uint64_t seed = 42;
  double rank_tol = 1e-8;
  double margin_tol = 1e-10;
  bool project = true;
  std::size_t max_attempt_factor = 50;
};

// L_f h + θ_d α(h) − ‖L_w h‖²/ε at x.
inline double zero_set_margin(const LieData& lie, const BarrierSpec& bar) {
  return lie.lf_h + bar.theta_d * bar.alpha(lie.h_val) - lie.lw_h.squaredNorm() / bar.epsilon;
}

inline std::vector<VectorXd> sample_exterior(const SafeSetGeometry& geom, const VerifyOptions& o) {
  BoxSampler sampler(o.box_lower, o.box_upper, o.seed);
  auto pts = sampler.draw_where([&](const VectorXd& x) { return geom.in_exterior_region(x); },
                                o.samples, o.samples * o.max_attempt_factor);
  if (pts.empty()) throw SamplerError("no samples found in D \\ Int(S) within the box");
  return pts;
}

// Zero-set implication: at x ∈ D∖Int(S) with L_g h(x) = 0, require
// L_f h + θ_d α(h) > ‖L_w h‖²/ε. Zero-set points come from direct hits and
// from Gauss–Newton projection of seed samples onto {L_g h = 0}.
inline SampleReport check_od_issf(const DisturbedSystem& sys, const BarrierSpec& bar,
                                  const SafeSetGeometry& geom, const VerifyOptions& o) {
  SampleReport rep;
  rep.check = "od_issf";
  const auto pts = sample_exterior(geom, o);
  auto lg = [&](const VectorXd& x) -> VectorXd { return eval_lie(sys, bar, x).lg_h; };

  for (std::size_t k = 0; k < pts.size(); ++k) {
    const VectorXd& x = pts[k];
    ++rep.samples_checked;
    const LieData lie = eval_lie(sys, bar, x);
    if (lie.lg_h.norm() <= o.rank_tol) rep.record(x, zero_set_margin(lie, bar), o.margin_tol);
    if (!o.project || k >= o.projection_seeds) continue;
    ProjectionOptions po;
    po.tol = std::min(po.tol, o.rank_tol);
    const auto z = project_to_zero_set(lg, x, po);
    if (!z || !geom.in_exterior_region(*z)) continue;
    const LieData lz = eval_lie(sys, bar, *z);
    if (lz.lg_h.norm() > o.rank_tol) continue;
    rep.record(*z, zero_set_margin(lz, bar), o.margin_tol);
  }
  rep.finalize();
  return rep;
}

// Sufficient condition: L_g h ≠ 0 on D∖Int(S). min_margin is min ‖L_g h‖.
inline SampleReport check_prop1(const DisturbedSystem& sys, const BarrierSpec& bar,
                                const SafeSetGeometry& geom, const VerifyOptions& o) {
  SampleReport rep;
  rep.check = "prop1";
  for (const VectorXd& x : sample_exterior(geom, o)) {
    ++rep.samples_checked;
    rep.record(x, eval_lie(sys, bar, x).lg_h.norm(), o.rank_tol);
  }
  rep.finalize();
  return rep;
}

struct RayOptions {
  VectorXd center;
  std::size_t rays = 1000;
  double max_radius = 10.0;
  std::size_t scan_steps = 400;
  std::uint64_t seed = 42;
  double grad_tol = 1e-8;
};

// Finds t in [0, R] with h(c + t·dir) = κ by scan + bisection.
inline std::optional<VectorXd> trace_level(const std::function<double(const VectorXd&)>& h,
                                           const VectorXd& c, const VectorXd& dir, double kappa,
                                           double radius, std::size_t steps) {
  double t0 = 0.0;
  double f0 = h(c) - kappa;
  for (std::size_t s = 1; s <= steps; ++s) {
    const double t1 = radius * static_cast<double>(s) / static_cast<double>(steps);
    const double f1 = h(c + t1 * dir) - kappa;
    if (f0 == 0.0) return VectorXd(c + t0 * dir);
    if ((f0 > 0.0) != (f1 > 0.0)) {
      double lo = t0, hi = t1, flo = f0;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = h(c + mid * dir) - kappa;
        if ((fm > 0.0) == (flo > 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      return VectorXd(c + 0.5 * (lo + hi) * dir);
    }
    t0 = t1;
    f0 = f1;
  }
  return std::nullopt;
}

// Every κ ∈ (−b, 0] should be a regular value: ‖∇h‖ > tol on {h = κ}.
// min_margin is the smallest gradient norm found on the level sets.
inline SampleReport check_regular_values(const BarrierSpec& bar, const SafeSetGeometry& geom,
                                         const std::vector<double>& kappas, const RayOptions& o) {
  SampleReport rep;
  rep.check = "regular_values";
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double kappa : kappas) {
    if (!(kappa <= 0.0 && kappa > -geom.b)) throw ParameterError("kappa must lie in (-b, 0]");
    for (std::size_t k = 0; k < o.rays; ++k) {
      VectorXd dir(o.center.size());
      for (Index i = 0; i < dir.size(); ++i) dir(i) = normal(rng);
      dir.normalize();
      ++rep.samples_checked;
      const auto x = trace_level(bar.h, o.center, dir, kappa, o.max_radius, o.scan_steps);
      if (!x || !geom.in_box(*x)) continue;
      rep.record(*x, bar.gradient(*x).norm(), o.grad_tol);
    }
  }
  rep.finalize();
  return rep;
}

struct MatchedReport {
  std::vector<double> residuals;
  std::vector<bool> matched;
  double max_residual = 0.0;
  bool all_matched = true;
};

// Largest least-squares residual of the columns of w(x) against range(g(x)).
inline double matched_residual(const MatrixXd& g, const MatrixXd& w) {
  if (w.cols() == 0) return 0.0;
  if (g.cols() == 0) return w.colwise().norm().maxCoeff();
  const MatrixXd coeff = g.completeOrthogonalDecomposition().solve(w);
  return (w - g * coeff).colwise().norm().maxCoeff();
}

inline MatchedReport check_matched(const DisturbedSystem& sys, const std::vector<VectorXd>& samples,
                                   double tol = 1e-9) {
  MatchedReport rep;
  for (const VectorXd& x : samples) {
    const double r = matched_residual(sys.input_matrix(x), sys.disturbance_matrix(x));
    rep.residuals.push_back(r);
    rep.matched.push_back(r <= tol);
    rep.max_residual = std::max(rep.max_residual, r);
    rep.all_matched = rep.all_matched && r <= tol;
  }
  return rep;
}

// For matched systems L_w h = L_g h·φ, so L_g h = 0 forces L_w h = 0.
// Projects seeds onto {L_g h = 0} and checks ‖L_w h‖ <= tol at matched
// points. min_margin is tol − max ‖L_w h‖.
inline SampleReport check_matched_implication(const DisturbedSystem& sys, const BarrierSpec& bar,
                                              const std::vector<VectorXd>& seeds,
                                              double rank_tol = 1e-8, double tol = 1e-9) {
  SampleReport rep;
  rep.check = "matched_implication";
  auto lg = [&](const VectorXd& x) -> VectorXd { return eval_lie(sys, bar, x).lg_h; };
  ProjectionOptions po;
  po.tol = std::min(po.tol, rank_tol);
  for (const VectorXd& s : seeds) {
    ++rep.samples_checked;
    const auto z = project_to_zero_set(lg, s, po);
    if (!z) continue;
    if (matched_residual(sys.input_matrix(*z), sys.disturbance_matrix(*z)) > tol) continue;
    const LieData lie = eval_lie(sys, bar, *z);
    if (lie.lg_h.norm() > rank_tol) continue;
    // ‖L_w h‖ == tol is allowed.
    rep.record(*z, tol - lie.lw_h.norm(), -std::numeric_limits<double>::denorm_min());
  }
  rep.finalize();
  return rep;
}

}  // namespace odcbf
