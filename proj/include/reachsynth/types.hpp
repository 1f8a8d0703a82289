/*
 * types.hpp
 *
 * Common dense-algebra aliases. Eigen is the only math dependency of the
 * library; everything numeric flows through these types.
 */

#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace reachsynth {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecI = Eigen::VectorXi;

/* dense types over an arbitrary scalar ring (double, Interval, ...) */
template <class Scalar>
using VecT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using MatT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using CellIndex = std::int64_t;

}  // namespace reachsynth
