#pragma once

// Smooth safeguarding virtual controllers via the Half-Sontag formula.

#include <cmath>
#include <string>
#include <utility>

#include "odcbf/autodiff.hpp"
#include "odcbf/barrier.hpp"
#include "odcbf/class_k.hpp"
#include "odcbf/dynamics.hpp"

namespace odcbf {

// λ_HS = (−a + sqrt(a² + σB²)) / (2B) with B = ‖b‖².
// For a >= 0 the rationalised form σB / (2(a + sqrt(a² + σB²))) is used; it
// is analytic through B = 0, so derivatives stay finite there.
template <class T>
T half_sontag_gain(const T& a, const T& b_sq, double sigma, int layer = 0) {
  using std::sqrt;
  if (value_of(b_sq) == 0.0 && !(value_of(a) > 0.0)) {
    throw SynthesisInfeasibleError(
        "Half-Sontag: L_g h = 0 with a <= 0 (layer " + std::to_string(layer) + ")", layer);
  }
  const T root = sqrt(a * a + sigma * b_sq * b_sq);
  if (value_of(a) >= 0.0) return sigma * b_sq / (2.0 * (a + root));
  return (root - a) / (2.0 * b_sq);
}

// u = λ_HS·bᵀ, so that a + b·u = (a + sqrt(a² + σ‖b‖⁴))/2 > 0.
template <class T>
Vec<T> half_sontag(const T& a, const Vec<T>& b, double sigma, int layer = 0) {
  if (!(sigma > 0.0)) throw ParameterError("sigma must be positive");
  const T lambda = half_sontag_gain(a, T(b.squaredNorm()), sigma, layer);
  return lambda * b;
}

struct NoNominal {};

// k(x₁) = k_n(x₁) + HalfSontag(a(x₁) + L_g h·k_n(x₁), L_g h(x₁), σ) with
// a = L_f h + θ_d α(h) − ‖L_w h‖²/ε. With NoNominal, k_n = 0.
//
// Model is the layer seen with its virtual input; Barrier is scalar-generic.
template <ControlAffineModel Model, class Barrier, class Nominal = NoNominal>
class SmoothVirtualController {
 public:
  SmoothVirtualController(Model model, Barrier barrier, ExtendedClassK alpha, double epsilon,
                          double theta_d, double sigma, Nominal nominal = {}, int layer = 1)
      : model_(std::move(model)),
        barrier_(std::move(barrier)),
        alpha_(std::move(alpha)),
        epsilon_(epsilon),
        theta_d_(theta_d),
        sigma_(sigma),
        nominal_(std::move(nominal)),
        layer_(layer) {
    if (!(epsilon_ > 0.0)) throw ParameterError("epsilon must be positive");
    if (!(theta_d_ > 0.0)) throw ParameterError("theta_d must be positive");
    if (!(sigma_ > 0.0)) throw ParameterError("sigma must be positive");
  }

  Index input_dim() const { return model_.state_dim(); }
  Index output_dim() const { return model_.input_dim(); }
  double sigma() const { return sigma_; }
  int layer() const { return layer_; }
  const Model& model() const { return model_; }
  const Barrier& barrier() const { return barrier_; }

  // a(x₁): the part of the barrier condition not multiplied by the input.
  template <class T>
  T drift_term(const LieTerms<T>& lt) const {
    return lt.lf_h + theta_d_ * alpha_(lt.h) - lt.lw_h.squaredNorm() / epsilon_;
  }

  template <class T>
  Vec<T> operator()(const Vec<T>& x1) const {
    const LieTerms<T> lt = lie_terms(model_, barrier_, x1);
    const T a = drift_term(lt);
    if constexpr (std::is_same_v<Nominal, NoNominal>) {
      return half_sontag(a, lt.lg_h, sigma_, layer_);
    } else {
      const Vec<T> kn = nominal_(x1);
      return kn + half_sontag(T(a + lt.lg_h.dot(kn)), lt.lg_h, sigma_, layer_);
    }
  }

  MatrixXd jacobian(const VectorXd& x1) const { return ad::jacobian(*this, Vec<double>(x1)); }

  // Strict-inequality residual a(x₁) + L_g h·k(x₁); positive wherever
  // synthesis succeeds.
  double margin(const VectorXd& x1) const {
    const LieTerms<double> lt = lie_terms(model_, barrier_, Vec<double>(x1));
    return drift_term(lt) + lt.lg_h.dot((*this)(Vec<double>(x1)));
  }

  FeedbackLaw as_feedback_law() const {
    SmoothVirtualController self = *this;
    return FeedbackLaw::stationary(
        [self](const VectorXd& x) -> VectorXd { return self(Vec<double>(x)); },
        [self](const VectorXd& x) -> MatrixXd { return self.jacobian(x); });
  }

 private:
  Model model_;
  Barrier barrier_;
  ExtendedClassK alpha_;
  double epsilon_;
  double theta_d_;
  double sigma_;
  Nominal nominal_;
  int layer_;
};

template <ControlAffineModel Model, class Barrier, class Nominal = NoNominal>
SmoothVirtualController<Model, Barrier, Nominal> synth_virtual(Model model, Barrier barrier,
                                                               ExtendedClassK alpha, double epsilon,
                                                               double theta_d, double sigma = 1.0,
                                                               Nominal nominal = {}, int layer = 1) {
  return SmoothVirtualController<Model, Barrier, Nominal>(std::move(model), std::move(barrier),
                                                          std::move(alpha), epsilon, theta_d, sigma,
                                                          std::move(nominal), layer);
}

}  // namespace odcbf
