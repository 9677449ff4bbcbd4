#pragma once

// Dual-relative-degree (DRD) systems
//
//   ż = f_z(z) + g_z(z)ψ(η)u_z + w_z(z)d
//   η̇ = f_η(η) + g_η(η)u_η + w_η(η)d
//
// The top layer is driven through v = ψ(η)u_z. A virtual controller k_v(z) is
// realised by u_z = ψ(η)†k_v(z), and the bottom layer is steered toward the
// aligning state η_d(k_v(z)) through the barrier
//   h(z, η) = h_z(z) − (1/2μ)‖η − η_d(k_v(z))‖².

#include <algorithm>
#include <cmath>
#include <utility>

#include <Eigen/Eigenvalues>

#include "odcbf/autodiff.hpp"
#include "odcbf/barrier.hpp"
#include "odcbf/dynamics.hpp"
#include "odcbf/smooth_synthesis.hpp"

namespace odcbf {

inline constexpr double kSingularValueFloor = 1e-8;

// Top is the z-layer seen with the virtual input v (input matrix g_z, n₁×r).
// Bottom is the η-layer with input u_η. Psi maps η to an r×m₁ matrix.
template <ControlAffineModel Top, ControlAffineModel Bottom, class Psi>
struct DrdSystem {
  Top top;
  Bottom bottom;
  Psi psi;
  Index m1 = 1;

  Index z_dim() const { return top.state_dim(); }
  Index eta_dim() const { return bottom.state_dim(); }
  Index r() const { return top.input_dim(); }
  Index state_dim() const { return z_dim() + eta_dim(); }
  Index disturbance_dim() const { return top.disturbance_dim(); }

  MatrixXd psi_at(const VectorXd& eta) const { return psi(Vec<double>(eta)); }

  // Physical system in (z, η) with input (u_z, u_η).
  DisturbedSystem physical() const {
    const DrdSystem self = *this;
    DisturbedSystem sys;
    const Index n1 = z_dim(), n2 = eta_dim(), m2 = bottom.input_dim();
    sys.n = n1 + n2;
    sys.m = m1 + m2;
    sys.p = disturbance_dim();
    sys.f = [self, n1, n2](const VectorXd& x) -> VectorXd {
      VectorXd out(n1 + n2);
      out.head(n1) = self.top.drift(Vec<double>(x.head(n1)));
      out.tail(n2) = self.bottom.drift(Vec<double>(x.tail(n2)));
      return out;
    };
    sys.g = [self, n1, n2, m2](const VectorXd& x) -> MatrixXd {
      MatrixXd out = MatrixXd::Zero(n1 + n2, self.m1 + m2);
      out.topLeftCorner(n1, self.m1) =
          self.top.input_matrix(Vec<double>(x.head(n1))) * self.psi_at(x.tail(n2));
      out.bottomRightCorner(n2, m2) = self.bottom.input_matrix(Vec<double>(x.tail(n2)));
      return out;
    };
    sys.w = [self, n1, n2](const VectorXd& x) -> MatrixXd {
      MatrixXd out(n1 + n2, self.disturbance_dim());
      out.topRows(n1) = self.top.disturbance_matrix(Vec<double>(x.head(n1)));
      out.bottomRows(n2) = self.bottom.disturbance_matrix(Vec<double>(x.tail(n2)));
      return out;
    };
    return sys;
  }
};

// Smallest singular value of a tall matrix from its normal equations.
inline double min_singular_value_tall(const MatrixXd& a) {
  const MatrixXd gram = a.transpose() * a;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, eig.eigenvalues()(0)));
}

// Left pseudoinverse (ψᵀψ)⁻¹ψᵀ.
inline MatrixXd left_pseudoinverse(const MatrixXd& psi) {
  const double smin = min_singular_value_tall(psi);
  if (psi.rows() < psi.cols() || smin < kSingularValueFloor) {
    throw AlignmentError("psi(eta) is not full column rank (min singular value " +
                             std::to_string(smin) + ")",
                         smin);
  }
  const MatrixXd gram = psi.transpose() * psi;
  return gram.ldlt().solve(psi.transpose());
}

// u_z = ψ(η)†v, the least-squares minimiser of ‖v − ψ(η)u‖.
inline VectorXd align_uz(const MatrixXd& psi_eta, const VectorXd& v) {
  if (psi_eta.rows() != v.size()) throw ShapeError("virtual input: dimension differs from psi rows");
  return left_pseudoinverse(psi_eta) * v;
}

// ‖ψψ†v − v‖: zero when η aligns the thrust directions with v.
inline double alignment_residual(const MatrixXd& psi_eta, const VectorXd& v) {
  return (psi_eta * align_uz(psi_eta, v) - v).norm();
}

// Planar-quadrotor attitude map θ_d = atan(−v₁/v₂), guarded by v₂ > v_min.
struct QuadrotorAttitudeMap {
  double v_min = 0.0;

  Index dim() const { return 1; }

  template <class T>
  Vec<T> operator()(const Vec<T>& v) const {
    using std::atan;
    if (v.size() != 2) throw ShapeError("v: expected dimension 2");
    if (!(value_of(v(1)) > v_min)) {
      throw ThrustDomainError("virtual thrust v2 = " + std::to_string(value_of(v(1))) +
                              " not above v_min = " + std::to_string(v_min));
    }
    Vec<T> out(1);
    out(0) = atan(-v(0) / v(1));
    return out;
  }

  MatrixXd jacobian(const VectorXd& v) const { return ad::jacobian(*this, Vec<double>(v)); }
};

inline double quadrotor_eta_d(const VectorXd& v, double v_min = 0.0) {
  return QuadrotorAttitudeMap{v_min}(Vec<double>(v))(0);
}

// h(z, η) = h_z(z) − (1/2μ)‖η − η_d(k_v(z))‖².
template <class Hz, class Kv, class EtaD>
class DrdBarrier {
 public:
  DrdBarrier(Hz h_z, Kv k_v, EtaD eta_d, Index eta_dim, double mu)
      : h_z_(std::move(h_z)), k_v_(std::move(k_v)), eta_d_(std::move(eta_d)),
        eta_dim_(eta_dim), mu_(mu) {
    if (!(mu_ > 0.0)) throw ParameterError("mu must be positive");
    z_dim_ = k_v_.input_dim();
  }

  Index dim() const { return z_dim_ + eta_dim_; }
  Index z_dim() const { return z_dim_; }
  Index eta_dim() const { return eta_dim_; }
  double mu() const { return mu_; }
  const Hz& h_z() const { return h_z_; }
  const Kv& k_v() const { return k_v_; }
  const EtaD& eta_d() const { return eta_d_; }

  template <class T>
  Vec<T> desired_eta(const Vec<T>& z) const {
    return eta_d_(k_v_(z));
  }

  // V(z, η) = (1/2μ)‖η − η_d(k_v(z))‖².
  template <class T>
  T lyapunov(const Vec<T>& x) const {
    const Vec<T> z = x.head(z_dim_);
    const Vec<T> e = Vec<T>(x.tail(eta_dim_)) - desired_eta(z);
    return e.squaredNorm() / (2.0 * mu_);
  }

  template <class T>
  T operator()(const Vec<T>& x) const {
    const Vec<T> z = x.head(z_dim_);
    return T(h_z_(z)) - lyapunov(x);
  }

  // ∂h/∂z = ∂h_z/∂z + (1/μ)eᵀ(∂η_d/∂v)(∂k_v/∂z),  ∂h/∂η = −(1/μ)eᵀ,
  // with e = η − η_d(k_v(z)).
  VectorXd gradient(const VectorXd& x) const {
    require_size(x, dim(), "x");
    const VectorXd z = x.head(z_dim_);
    const VectorXd v = k_v_(Vec<double>(z));
    const VectorXd e = x.tail(eta_dim_) - eta_d_(Vec<double>(v));
    const MatrixXd chain = ad::jacobian(eta_d_, Vec<double>(v)) * k_v_.jacobian(z);
    VectorXd grad(dim());
    grad.head(z_dim_) = ad::gradient(h_z_, Vec<double>(z)) + chain.transpose() * e / mu_;
    grad.tail(eta_dim_) = -e / mu_;
    return grad;
  }

  // (z, η_d(k_v(z))): the aligned manifold where V vanishes.
  VectorXd lift(const VectorXd& z) const {
    VectorXd x(dim());
    x.head(z_dim_) = z;
    x.tail(eta_dim_) = desired_eta(Vec<double>(z));
    return x;
  }

 private:
  Hz h_z_;
  Kv k_v_;
  EtaD eta_d_;
  Index z_dim_ = 0;
  Index eta_dim_ = 0;
  double mu_;
};

template <class Hz, class Kv, class EtaD>
DrdBarrier<Hz, Kv, EtaD> drd_barrier(Hz h_z, Kv k_v, EtaD eta_d, Index eta_dim, double mu) {
  return DrdBarrier<Hz, Kv, EtaD>(std::move(h_z), std::move(k_v), std::move(eta_d), eta_dim, mu);
}

// Partial closed loop with u_z = ψ(η)†k_v(z):
//   f_p = (f_z + g_z ψψ†k_v(z); f_η),  g_p = (0; g_η),  w_p = (w_z; w_η).
template <class Top, class Bottom, class Psi, class Kv>
DisturbedSystem partial_closed_loop(const DrdSystem<Top, Bottom, Psi>& dsys, Kv k_v) {
  const Index n1 = dsys.z_dim(), n2 = dsys.eta_dim(), m2 = dsys.bottom.input_dim();
  DisturbedSystem sys;
  sys.n = n1 + n2;
  sys.m = m2;
  sys.p = dsys.disturbance_dim();
  sys.f = [dsys, k_v, n1, n2](const VectorXd& x) -> VectorXd {
    const Vec<double> z = x.head(n1);
    const Vec<double> eta = x.tail(n2);
    const MatrixXd psi = dsys.psi_at(eta);
    const VectorXd v = k_v(z);
    VectorXd out(n1 + n2);
    out.head(n1) = dsys.top.drift(z) + dsys.top.input_matrix(z) * (psi * align_uz(psi, v));
    out.tail(n2) = dsys.bottom.drift(eta);
    return out;
  };
  sys.g = [dsys, n1, n2, m2](const VectorXd& x) -> MatrixXd {
    MatrixXd out = MatrixXd::Zero(n1 + n2, m2);
    out.bottomRows(n2) = dsys.bottom.input_matrix(Vec<double>(x.tail(n2)));
    return out;
  };
  sys.w = [dsys, n1, n2](const VectorXd& x) -> MatrixXd {
    MatrixXd out(n1 + n2, dsys.disturbance_dim());
    out.topRows(n1) = dsys.top.disturbance_matrix(Vec<double>(x.head(n1)));
    out.bottomRows(n2) = dsys.bottom.disturbance_matrix(Vec<double>(x.tail(n2)));
    return out;
  };
  return sys;
}

// u_z = k_z(z, η) = ψ(η)†k_v(z) as a law over the stacked state.
template <class Top, class Bottom, class Psi, class Kv>
FeedbackLaw aligned_top_law(const DrdSystem<Top, Bottom, Psi>& dsys, Kv k_v) {
  const Index n1 = dsys.z_dim(), n2 = dsys.eta_dim();
  return FeedbackLaw::stationary([dsys, k_v, n1, n2](const VectorXd& x) -> VectorXd {
    return align_uz(dsys.psi_at(x.tail(n2)), k_v(Vec<double>(x.head(n1))));
  });
}

}  // namespace odcbf
