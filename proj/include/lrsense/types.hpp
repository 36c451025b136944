#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace lrsense {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised when an iteration produces non-finite values or cannot make progress.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline double l1_norm(const Matrix& m) { return m.cwiseAbs().sum(); }

}  // namespace lrsense
