#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "odcbf/scenarios/pendulum.hpp"
#include "odcbf/smooth_synthesis.hpp"

using namespace odcbf;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

double post_value(double a, const VectorXd& b, const VectorXd& u) { return a + b.dot(u); }

}  // namespace

TEST(HalfSontag, Examples) {
  const VectorXd u0 = half_sontag(0.0, Vec<double>(vec({1, 0})), 1.0);
  EXPECT_NEAR(u0(0), 0.5, 1e-15);
  EXPECT_EQ(u0(1), 0.0);
  EXPECT_NEAR(post_value(0.0, vec({1, 0}), u0), 0.5, 1e-15);

  const VectorXd uz = half_sontag(3.0, Vec<double>(vec({0, 0})), 1.0);
  EXPECT_EQ(uz.norm(), 0.0);

  const VectorXd un = half_sontag(-1.0, Vec<double>(vec({1})), 4.0);
  EXPECT_NEAR(un(0), (1.0 + std::sqrt(5.0)) / 2.0, 1e-14);
  EXPECT_NEAR(post_value(-1.0, vec({1}), un), (-1.0 + std::sqrt(5.0)) / 2.0, 1e-14);
}

TEST(HalfSontag, InfeasibleWhenNoInputAuthority) {
  try {
    half_sontag(0.0, Vec<double>(VectorXd::Zero(2)), 1.0, 2);
    FAIL();
  } catch (const SynthesisInfeasibleError& e) {
    EXPECT_EQ(e.layer(), 2);
  }
  EXPECT_THROW(half_sontag(-1.0, Vec<double>(VectorXd::Zero(1)), 1.0), SynthesisInfeasibleError);
  EXPECT_THROW(half_sontag(1.0, Vec<double>(VectorXd::Ones(1)), 0.0), ParameterError);
}

TEST(HalfSontag, StrictInequalityAndClosedFormResidual) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> us(0.01, 10.0);
  for (int k = 0; k < 5000; ++k) {
    const double a = 3.0 * nd(rng), sigma = us(rng);
    VectorXd b(3);
    b << nd(rng), nd(rng), nd(rng);
    const VectorXd u = half_sontag(a, Vec<double>(b), sigma);
    const double post = post_value(a, b, u);
    const double bb = b.squaredNorm();
    EXPECT_GT(post, 0.0);
    EXPECT_NEAR(post, 0.5 * (a + std::sqrt(a * a + sigma * bb * bb)), 1e-9 * (1.0 + std::abs(a)));
  }
}

TEST(HalfSontag, ResidualNondecreasingInSigma) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 500; ++k) {
    const double a = 2.0 * nd(rng);
    VectorXd b(2);
    b << nd(rng), nd(rng);
    double prev = -1.0;
    for (double sigma = 0.01; sigma < 20.0; sigma *= 1.5) {
      const double post = post_value(a, b, half_sontag(a, Vec<double>(b), sigma));
      EXPECT_GE(post, prev - 1e-14);
      prev = post;
    }
  }
}

TEST(HalfSontag, VanishesAsSigmaShrinksWhenDriftTermPositive) {
  VectorXd b(1);
  b << 0.8;
  double prev = 1e9;
  for (double sigma = 1.0; sigma > 1e-9; sigma *= 0.1) {
    const double n = half_sontag(0.4, Vec<double>(b), sigma).norm();
    EXPECT_LE(n, prev);
    prev = n;
  }
  EXPECT_LT(prev, 1e-8);
}

TEST(HalfSontag, SmoothThroughZeroInputGain) {
  // d/db at b = 0 exists when a > 0; compare AD with differences.
  auto f = [](const auto& b) {
    using T = typename std::decay_t<decltype(b)>::Scalar;
    return Vec<T>(half_sontag(T(0.7), b, 1.0));
  };
  const VectorXd b0 = VectorXd::Zero(2);
  const MatrixXd j = ad::jacobian(f, Vec<double>(b0));
  EXPECT_TRUE(j.allFinite());
  const MatrixXd n = fd::jacobian([&](const VectorXd& b) { return VectorXd(f(Vec<double>(b))); }, b0);
  EXPECT_LE((j - n).norm(), 1e-6);
}

TEST(SynthVirtual, PendulumAtOriginIsZero) {
  const auto sc = scenarios::build_pendulum({});
  const VectorXd q0 = VectorXd::Zero(1);
  // a(0) = θ_d α(1) − 0 > 0 and L_g h = 0.
  EXPECT_EQ(sc.k1(Vec<double>(q0))(0), 0.0);
  EXPECT_GT(sc.k1.margin(q0), 0.0);
}

TEST(SynthVirtual, StrictMarginAndJacobianOnLayerOne) {
  const auto sc = scenarios::build_pendulum({});
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int k = 0; k < 1000; ++k) {
    const VectorXd q = VectorXd::Constant(1, u(rng));
    EXPECT_GT(sc.k1.margin(q), 0.0);
    const MatrixXd j = sc.k1.jacobian(q);
    const MatrixXd n = fd::jacobian([&](const VectorXd& y) { return VectorXd(sc.k1(Vec<double>(y))); }, q);
    EXPECT_TRUE(j.allFinite());
    EXPECT_LE(std::abs(j(0, 0) - n(0, 0)) / std::max(1.0, std::abs(n(0, 0))), 1e-6);
  }
}

TEST(SynthVirtual, MatchesHandFormulaOnLayerOne) {
  scenarios::PendulumConfig cfg;
  cfg.epsilon = 2.0;
  cfg.sigma = 3.0;
  const auto sc = scenarios::build_pendulum(cfg);
  for (double q : {-1.3, -0.4, 0.25, 0.9, 1.2}) {
    const double a = cfg.theta_d * (1 - q * q) - (4 * q * q * cfg.nu * cfg.nu) / cfg.epsilon;
    const double b = -2 * q, bb = b * b;
    const double lam = (-a + std::sqrt(a * a + cfg.sigma * bb * bb)) / (2 * bb);
    EXPECT_NEAR(sc.k1(Vec<double>(VectorXd::Constant(1, q)))(0), lam * b, 1e-12);
  }
}
