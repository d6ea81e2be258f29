#pragma once

#include <Eigen/Dense>

namespace fedsim {

// Dense 64-bit real types used throughout. All model parameters, deltas and
// aggregation buffers are flat Vec instances; matrix views are mapped on top
// where a module needs 2-D structure.
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// y += a * x, the one BLAS-1 idiom the aggregation code leans on.
inline void axpy(double a, const Eigen::Ref<const Vec>& x, Eigen::Ref<Vec> y) {
  y += a * x;
}

inline bool all_finite(const Eigen::Ref<const Vec>& v) {
  return v.allFinite();
}

}  // namespace fedsim
