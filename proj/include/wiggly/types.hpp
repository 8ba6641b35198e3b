// Dense linear-algebra aliases shared by all wiggly headers.
#pragma once

#include <Eigen/Dense>

namespace wiggly {

using Index = Eigen::Index;

template <class Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <class Scalar>
using Vec4 = Eigen::Matrix<Scalar, 4, 1>;

template <class Scalar>
using Mat4 = Eigen::Matrix<Scalar, 4, 4>;

template <class Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

// Integer power by repeated multiplication; pow0(x, 0) == 1 for any x,
// including 0, which std::pow does not guarantee for complex arguments.
template <class T>
T ipow(const T& base, int exponent) {
  T result(1);
  for (int i = 0; i < exponent; ++i) result *= base;
  return result;
}

}  // namespace wiggly
