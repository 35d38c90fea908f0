#pragma once

#include <Eigen/Dense>

namespace momentlab {

template <typename S>
using Vec = Eigen::Vector<S, Eigen::Dynamic>;
template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

using VecXd = Vec<double>;
using MatXd = Mat<double>;
using VecXf = Vec<float>;
using MatXf = Mat<float>;

using Index = Eigen::Index;

}  // namespace momentlab
