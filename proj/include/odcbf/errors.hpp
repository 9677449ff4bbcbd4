#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace odcbf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument with the wrong dimension; the message names the argument.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

// State outside D = {h + b > 0}.
class DomainError : public Error {
 public:
  using Error::Error;
};

// -εδ²/(2θ_d) lies outside the range of α.
class MarginUndefinedError : public Error {
 public:
  using Error::Error;
};

// L_g h = 0 with α(h) <= 0 and υ < 0: no (u, ω) meets the barrier condition.
class InfeasiblePointError : public Error {
 public:
  InfeasiblePointError(const std::string& what, double upsilon)
      : Error(what), upsilon_(upsilon) {}
  double upsilon() const { return upsilon_; }

 private:
  double upsilon_;
};

// Half-Sontag synthesis hit b = 0 with a <= 0. layer() is the 1-based layer
// of a strict-feedback chain, or 0 when not known.
class SynthesisInfeasibleError : public Error {
 public:
  SynthesisInfeasibleError(const std::string& what, int layer = 0)
      : Error(what), layer_(layer) {}
  int layer() const { return layer_; }

 private:
  int layer_;
};

class AlignmentError : public Error {
 public:
  AlignmentError(const std::string& what, double min_singular_value)
      : Error(what), min_singular_value_(min_singular_value) {}
  double min_singular_value() const { return min_singular_value_; }

 private:
  double min_singular_value_;
};

// Virtual thrust component v₂ at or below the configured floor.
class ThrustDomainError : public Error {
 public:
  using Error::Error;
};

class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double t, Eigen::VectorXd state)
      : Error(what), t_(t), state_(std::move(state)) {}
  double time() const { return t_; }
  const Eigen::VectorXd& state() const { return state_; }

 private:
  double t_;
  Eigen::VectorXd state_;
};

class SamplerError : public Error {
 public:
  using Error::Error;
};

}  // namespace odcbf
