#pragma once

#include <string>

#include <Eigen/Core>

#include "odcbf/dual.hpp"
#include "odcbf/errors.hpp"

namespace odcbf {

template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline void require_size(const VectorXd& v, Index n, const std::string& name) {
  if (v.size() != n) {
    throw ShapeError(name + ": expected dimension " + std::to_string(n) + ", got " +
                     std::to_string(v.size()));
  }
}

inline void require_shape(const MatrixXd& m, Index rows, Index cols, const std::string& name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(name + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                     ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

template <class T>
Vec<double> values_of(const Vec<T>& v) {
  Vec<double> out(v.size());
  for (Index i = 0; i < v.size(); ++i) out(i) = value_of(v(i));
  return out;
}

}  // namespace odcbf
