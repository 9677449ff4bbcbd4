#pragma once

// Optimal-decay ISSf safety filter in closed form.
//
//   min  ½‖u − k_d‖² + ½p(ω − θ_d)²
//   s.t. L_f h + L_g h·u ≥ −ω α(h) + ‖L_w h‖²/ε,   ω ≥ θ_d
//
// Solution: u = k_d + λ L_g hᵀ, ω = θ(x) = θ_d + λζ with
//   υ = L_f h + L_g h·k_d + θ_d α(h) − ‖L_w h‖²/ε,  ξ = ‖L_g h‖,  ζ = α(h)/p,
//   λ = ReLU(−υ) / (ξ² + p ReLU(ζ)²)   (λ = 0 when ξ = 0 and ζ ≤ 0).

#include <algorithm>
#include <cmath>
#include <limits>

#include "odcbf/barrier.hpp"
#include "odcbf/dynamics.hpp"

namespace odcbf {

// kkt: denominator ξ² + p·ReLU(ζ)², the exact QP solution.
// literal: denominator ξ² + p·c² in the decay term with c = sup h, kept only
// for comparison runs.
enum class DenominatorForm { kkt, literal };

struct FilterOptions {
  DenominatorForm form = DenominatorForm::kkt;
  double upper_bound_c = std::numeric_limits<double>::infinity();
  double domain_b = std::numeric_limits<double>::infinity();
};

struct FilterResult {
  VectorXd u;
  double theta_x = 0.0;
  double upsilon = 0.0;
  double xi = 0.0;
  double zeta = 0.0;
  double lambda_val = 0.0;
  bool constraint_active = false;
};

inline double relu(double v) { return v > 0.0 ? v : 0.0; }

// Closed form from raw Lie terms. alpha_h is α(h(x)).
inline FilterResult od_issf_solve(double lf_h, const VectorXd& lg_h, const VectorXd& lw_h,
                                  double alpha_h, double epsilon, double theta_d, double p_weight,
                                  const VectorXd& k_d, const FilterOptions& opts = {}) {
  if (lg_h.size() != k_d.size()) throw ShapeError("k_d: dimension differs from L_g h");
  FilterResult r;
  r.upsilon = lf_h + lg_h.dot(k_d) + theta_d * alpha_h - lw_h.squaredNorm() / epsilon;
  r.xi = lg_h.norm();
  r.zeta = alpha_h / p_weight;

  const bool degenerate = r.xi == 0.0 && r.zeta <= 0.0;
  if (degenerate) {
    if (r.upsilon < 0.0) {
      throw InfeasiblePointError(
          "barrier condition cannot be met: L_g h = 0, alpha(h) <= 0 and upsilon < 0", r.upsilon);
    }
    r.lambda_val = 0.0;
    r.u = k_d;
    r.theta_x = theta_d;
    return r;
  }

  const double rz = relu(r.zeta);
  const double denom = r.xi * r.xi + p_weight * rz * rz;
  r.lambda_val = relu(-r.upsilon) / denom;
  r.u = k_d + r.lambda_val * lg_h;
  if (opts.form == DenominatorForm::kkt) {
    r.theta_x = theta_d + r.lambda_val * rz;
  } else {
    const double c = opts.upper_bound_c;
    const double denom_lit = r.xi * r.xi + p_weight * c * c;
    r.theta_x = theta_d + (std::isfinite(denom_lit) ? relu(-r.upsilon) * rz / denom_lit : 0.0);
  }
  r.constraint_active = r.lambda_val > 0.0;
  return r;
}

// QP constraint residual L_f h + L_g h·u + ω α(h) − ‖L_w h‖²/ε (>= 0 when met).
inline double constraint_residual(const LieData& lie, const BarrierSpec& bar, const VectorXd& u,
                                  double omega) {
  return lie.lf_h + lie.lg_h.dot(u) + omega * bar.alpha(lie.h_val) -
         lie.lw_h.squaredNorm() / bar.epsilon;
}

inline FilterResult od_issf_filter(const DisturbedSystem& sys, const BarrierSpec& bar,
                                   const VectorXd& k_d_value, const VectorXd& x,
                                   const FilterOptions& opts = {}) {
  require_size(k_d_value, sys.m, "k_d(x)");
  const LieData lie = eval_lie(sys, bar, x);
  if (!(lie.h_val + opts.domain_b > 0.0)) {
    throw DomainError("state outside D: h(x) + b = " + std::to_string(lie.h_val + opts.domain_b));
  }
  return od_issf_solve(lie.lf_h, lie.lg_h, lie.lw_h, bar.alpha(lie.h_val), bar.epsilon,
                       bar.theta_d, bar.p_weight, k_d_value, opts);
}

inline FilterResult od_issf_filter(const DisturbedSystem& sys, const BarrierSpec& bar,
                                   const FeedbackLaw& k_d, const VectorXd& x, double t = 0.0,
                                   const FilterOptions& opts = {}) {
  return od_issf_filter(sys, bar, k_d(t, x), x, opts);
}

// Filter over the virtual input of a top layer: `top` is the layer-1
// subsystem with x₂ as its input channel (input dimension n₂).
inline FilterResult od_issf_virtual_filter(const DisturbedSystem& top, const BarrierSpec& bar,
                                           const FeedbackLaw& k_d, const VectorXd& x1,
                                           const FilterOptions& opts = {}) {
  return od_issf_filter(top, bar, k_d(0.0, x1), x1, opts);
}

// Safety filter as a feedback law over the nominal k_d.
inline FeedbackLaw make_filtered_law(DisturbedSystem sys, BarrierSpec bar, FeedbackLaw k_d,
                                     FilterOptions opts = {}) {
  return {[sys = std::move(sys), bar = std::move(bar), k_d = std::move(k_d), opts](
              double t, const VectorXd& x) { return od_issf_filter(sys, bar, k_d, x, t, opts).u; },
          {}};
}

}  // namespace odcbf
