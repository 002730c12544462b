#pragma once

#include <Eigen/Dense>

namespace avarkit::detail {

/// Lawson-Hanson active-set solve of min ||A x - b|| subject to x >= 0.
/// Columns are rescaled to unit norm internally.
Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iterations = 500);

}  // namespace avarkit::detail
