#pragma once

#include <Eigen/Core>

namespace layermix {

template <typename S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// Column-major; sequence matrices hold one time step per column.
template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

}  // namespace layermix
