#pragma once

#include <Eigen/Dense>

namespace hypokin {

// State dimensions in this library are small (N <= 8); bounded-size dynamic
// matrices keep kernel evaluations free of heap traffic.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

}  // namespace hypokin
