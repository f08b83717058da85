#ifndef EZRL_TYPES_HPP
#define EZRL_TYPES_HPP

#include <Eigen/Dense>

namespace ezrl {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Eigen::VectorXd;
using RowVectorXd = Eigen::RowVectorXd;
using MatrixXd = Eigen::MatrixXd;
using Index = Eigen::Index;

}  // namespace ezrl

#endif  // EZRL_TYPES_HPP
