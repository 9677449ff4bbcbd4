#pragma once

// CBF backstepping for strict-feedback systems
//
//   ẋ₁ = f₁(x₁) + g₁(x₁)x₂ + w₁(x₁)d
//   ẋ₂ = f₂(x₁,x₂) + g₂(x₁,x₂)x₃ + w₂(x₁,x₂)d
//   ...
//   ẋ_N = f_N(x) + g_N(x)u + w_N(x)d
//
// Each layer i sees x_{i+1} as a virtual input. The composite barrier
// h(x) = h₁(x₁) − (1/2μ)‖x₂ − k₁(x₁)‖² penalises deviation from a smooth
// safeguarding controller k₁ and is applied recursively.

#include <array>
#include <cstddef>
#include <limits>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/SVD>

#include "odcbf/autodiff.hpp"
#include "odcbf/barrier.hpp"
#include "odcbf/smooth_synthesis.hpp"

namespace odcbf {

// One layer of a strict-feedback chain. F, G, W are scalar-generic callables
// of the stacked upstream state (x₁,…,x_i):
//   F -> Vec<T> (n_i),  G -> Mat<T> (n_i × next_dim),  W -> Mat<T> (n_i × p).
template <class F, class G, class W>
struct StrictFeedbackLayer {
  Index dim;
  Index next_dim;
  Index p;
  F f;
  G g;
  W w;
};

template <class F, class G, class W>
StrictFeedbackLayer<F, G, W> make_layer(Index dim, Index next_dim, Index p, F f, G g, W w) {
  return {dim, next_dim, p, std::move(f), std::move(g), std::move(w)};
}

template <std::size_t K, class Sys>
class TruncatedModel;

template <class... Layers>
class StrictFeedbackSystem {
 public:
  static constexpr std::size_t kLayers = sizeof...(Layers);
  static_assert(kLayers >= 1, "need at least one layer");

  explicit StrictFeedbackSystem(Layers... layers) : layers_(std::move(layers)...) {
    std::size_t i = 0;
    Index acc = 0;
    std::apply(
        [&](const auto&... l) {
          ((offsets_[i] = acc, dims_[i] = l.dim, acc += l.dim, ++i), ...);
        },
        layers_);
    total_ = acc;
    p_ = std::get<0>(layers_).p;
    check_chaining(std::make_index_sequence<kLayers>{});
  }

  Index state_dim() const { return total_; }
  Index input_dim() const { return std::get<kLayers - 1>(layers_).next_dim; }
  Index disturbance_dim() const { return p_; }
  Index layer_dim(std::size_t i) const { return dims_[i]; }
  Index layer_offset(std::size_t i) const { return offsets_[i]; }
  // Dimension of (x₁,…,x_k).
  Index upto_dim(std::size_t k) const { return k == 0 ? 0 : offsets_[k - 1] + dims_[k - 1]; }

  template <std::size_t I>
  const auto& layer() const {
    return std::get<I>(layers_);
  }

  template <std::size_t K>
  TruncatedModel<K, StrictFeedbackSystem> truncated() const {
    return TruncatedModel<K, StrictFeedbackSystem>(*this);
  }

  // Full system (x₁,…,x_N) with the physical input u.
  TruncatedModel<kLayers, StrictFeedbackSystem> full() const {
    return TruncatedModel<kLayers, StrictFeedbackSystem>(*this);
  }

 private:
  template <std::size_t... J>
  void check_chaining(std::index_sequence<J...>) const {
    auto check = [&]<std::size_t I>(std::integral_constant<std::size_t, I>) {
      const auto& l = std::get<I>(layers_);
      if (l.p != p_) throw ShapeError("layer " + std::to_string(I + 1) + ": disturbance dimension");
      if constexpr (I + 1 < kLayers) {
        if (l.next_dim != std::get<I + 1>(layers_).dim) {
          throw ShapeError("layer " + std::to_string(I + 1) +
                           ": g_i columns must equal the next layer's dimension");
        }
      }
    };
    (check(std::integral_constant<std::size_t, J>{}), ...);
  }

  std::tuple<Layers...> layers_;
  std::array<Index, kLayers> dims_{};
  std::array<Index, kLayers> offsets_{};
  Index total_ = 0;
  Index p_ = 0;
};

// Subsystem of the first K layers of a strict-feedback chain, with x_{K+1}
// (or u when K = N) as its input.
template <std::size_t K, class Sys>
class TruncatedModel {
 public:
  static_assert(K >= 1 && K <= Sys::kLayers);
  explicit TruncatedModel(const Sys& sys) : sys_(sys) {}

  Index state_dim() const { return sys_.upto_dim(K); }
  Index input_dim() const { return sys_.template layer<K - 1>().next_dim; }
  Index disturbance_dim() const { return sys_.disturbance_dim(); }

  template <class T>
  Vec<T> drift(const Vec<T>& x) const {
    Vec<T> out = Vec<T>::Zero(state_dim());
    [&]<std::size_t... J>(std::index_sequence<J...>) {
      (block_drift<J>(x, out), ...);
    }(std::make_index_sequence<K>{});
    return out;
  }

  template <class T>
  Mat<T> input_matrix(const Vec<T>& x) const {
    Mat<T> out = Mat<T>::Zero(state_dim(), input_dim());
    const auto& l = sys_.template layer<K - 1>();
    const Vec<T> xu = x.head(sys_.upto_dim(K));
    out.block(sys_.layer_offset(K - 1), 0, l.dim, l.next_dim) = l.g(xu);
    return out;
  }

  template <class T>
  Mat<T> disturbance_matrix(const Vec<T>& x) const {
    Mat<T> out = Mat<T>::Zero(state_dim(), disturbance_dim());
    [&]<std::size_t... J>(std::index_sequence<J...>) {
      ((out.block(sys_.layer_offset(J), 0, sys_.layer_dim(J), disturbance_dim()) =
            sys_.template layer<J>().w(Vec<T>(x.head(sys_.upto_dim(J + 1))))),
       ...);
    }(std::make_index_sequence<K>{});
    return out;
  }

 private:
  template <std::size_t J, class T>
  void block_drift(const Vec<T>& x, Vec<T>& out) const {
    const auto& l = sys_.template layer<J>();
    const Vec<T> xu = x.head(sys_.upto_dim(J + 1));
    Vec<T> fj = l.f(xu);
    if constexpr (J + 1 < K) {
      const Vec<T> next = x.segment(sys_.layer_offset(J + 1), sys_.layer_dim(J + 1));
      fj += l.g(xu) * next;
    }
    out.segment(sys_.layer_offset(J), l.dim) = fj;
  }

  Sys sys_;
};

template <class... Layers>
StrictFeedbackSystem<Layers...> make_strict_feedback(Layers... layers) {
  return StrictFeedbackSystem<Layers...>(std::move(layers)...);
}

// h(x) = h₁(x₁) − (1/2μ)‖x₂ − k₁(x₁)‖² over x = (x₁, x₂).
template <class Head, class Controller>
class CompositeBarrier {
 public:
  CompositeBarrier(Head head, Controller k1, double mu)
      : head_(std::move(head)), k1_(std::move(k1)), mu_(mu) {
    if (!(mu_ > 0.0)) throw ParameterError("mu must be positive");
    head_dim_ = k1_.input_dim();
    tail_dim_ = k1_.output_dim();
  }

  Index dim() const { return head_dim_ + tail_dim_; }
  Index head_dim() const { return head_dim_; }
  Index tail_dim() const { return tail_dim_; }
  double mu() const { return mu_; }
  const Head& head() const { return head_; }
  const Controller& controller() const { return k1_; }

  template <class T>
  T operator()(const Vec<T>& x) const {
    const Vec<T> x1 = x.head(head_dim_);
    const Vec<T> e = Vec<T>(x.tail(tail_dim_)) - k1_(x1);
    return T(head_(x1)) - e.squaredNorm() / (2.0 * mu_);
  }

  // Chain rule:
  //   ∂h/∂x₁ = ∂h₁/∂x₁ + (1/μ)(x₂ − k₁)ᵀ ∂k₁/∂x₁,   ∂h/∂x₂ = −(1/μ)(x₂ − k₁)ᵀ.
  VectorXd gradient(const VectorXd& x) const {
    require_size(x, dim(), "x");
    const VectorXd x1 = x.head(head_dim_);
    const VectorXd e = x.tail(tail_dim_) - k1_(Vec<double>(x1));
    VectorXd grad(dim());
    grad.head(head_dim_) = head_gradient(x1) + k1_.jacobian(x1).transpose() * e / mu_;
    grad.tail(tail_dim_) = -e / mu_;
    return grad;
  }

  // Deviation x₂ − k₁(x₁).
  VectorXd deviation(const VectorXd& x) const {
    return x.tail(tail_dim_) - k1_(Vec<double>(x.head(head_dim_)));
  }

  // Point (x₁, k₁(x₁)) on the manifold where the penalty vanishes.
  VectorXd lift(const VectorXd& x1) const {
    VectorXd x(dim());
    x.head(head_dim_) = x1;
    x.tail(tail_dim_) = k1_(Vec<double>(x1));
    return x;
  }

 private:
  VectorXd head_gradient(const VectorXd& x1) const {
    if constexpr (HasExplicitGradient<Head>) {
      return head_.gradient(x1);
    } else {
      return ad::gradient(head_, Vec<double>(x1));
    }
  }

  Head head_;
  Controller k1_;
  double mu_;
  Index head_dim_ = 0;
  Index tail_dim_ = 0;
};

template <class Head, class Controller>
CompositeBarrier<Head, Controller> compose_barrier(Head h1, Controller k1, double mu) {
  return CompositeBarrier<Head, Controller>(std::move(h1), std::move(k1), mu);
}

// Minimum singular value of a (possibly wide) matrix; full row rank iff > 0.
inline double min_singular_value(const MatrixXd& m) {
  if (m.size() == 0 || m.rows() > m.cols()) return 0.0;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  return svd.singularValues()(m.rows() - 1);
}

struct RankReport {
  std::size_t samples_checked = 0;
  double min_singular_value = std::numeric_limits<double>::infinity();
  std::vector<VectorXd> flagged;
  bool passed() const { return flagged.empty(); }
};

// Full-row-rank check of an input matrix over samples of D∖Int(S).
inline RankReport check_row_rank(const std::function<MatrixXd(const VectorXd&)>& g,
                                 const std::vector<VectorXd>& samples, double tol = 1e-8) {
  if (samples.empty()) throw SamplerError("row-rank check: empty sample set");
  RankReport rep;
  for (const VectorXd& x : samples) {
    const double s = min_singular_value(g(x));
    rep.min_singular_value = std::min(rep.min_singular_value, s);
    if (s < tol) rep.flagged.push_back(x);
    ++rep.samples_checked;
  }
  return rep;
}

// g₂ of a two-layer system is the bottom rows of the full input matrix.
template <class Sys>
RankReport check_row_rank_g2(const Sys& sfs, const std::vector<VectorXd>& samples,
                             double tol = 1e-8) {
  const auto full = sfs.full();
  const Index off = sfs.layer_offset(Sys::kLayers - 1);
  const Index rows = sfs.layer_dim(Sys::kLayers - 1);
  return check_row_rank(
      [full, off, rows](const VectorXd& x) -> MatrixXd {
        return full.input_matrix(Vec<double>(x)).middleRows(off, rows);
      },
      samples, tol);
}

struct BacksteppingParams {
  ExtendedClassK alpha = ExtendedClassK::linear(1.0);
  double epsilon = 1.0;
  double theta_d = 1.0;
  std::vector<double> mus;
  std::vector<double> sigmas;
};

namespace detail {

template <std::size_t I, class Sys, class Barrier>
auto compose_from(const Sys& sys, Barrier barrier, const BacksteppingParams& prm) {
  if constexpr (I == Sys::kLayers) {
    return barrier;
  } else {
    auto k = synth_virtual(sys.template truncated<I>(), std::move(barrier), prm.alpha,
                           prm.epsilon, prm.theta_d, prm.sigmas[I - 1], NoNominal{},
                           static_cast<int>(I));
    auto next = compose_barrier(k.barrier(), std::move(k), prm.mus[I - 1]);
    return compose_from<I + 1>(sys, std::move(next), prm);
  }
}

}  // namespace detail

// Layer i composite h⁽ⁱ⁺¹⁾ = h⁽ⁱ⁾ − (1/2μ_i)‖x_{i+1} − k_i‖², k_i synthesised
// by Half-Sontag on layer i's truncated subsystem. Returns the full-state
// barrier. Synthesis failures surface at evaluation with the layer index.
template <class Sys, class H1>
auto recursive_compose(const Sys& sfs, H1 h1, const BacksteppingParams& prm) {
  if (prm.mus.size() != Sys::kLayers - 1 || prm.sigmas.size() != Sys::kLayers - 1) {
    throw ParameterError("recursive_compose: need N-1 mus and sigmas");
  }
  return detail::compose_from<1>(sfs, std::move(h1), prm);
}

}  // namespace odcbf
