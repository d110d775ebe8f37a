#pragma once

#include <Eigen/Core>

namespace spadsr {

/// Dense row-major image plane, height x width.
template <class Scalar>
using ImageT = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Image  = ImageT<double>;
using ImageF = ImageT<float>;

template <class Derived>
bool all_finite(const Eigen::ArrayBase<Derived>& a) {
  return a.isFinite().all();
}

}  // namespace spadsr
