#pragma once

#include <span>

#include <Eigen/Core>

namespace fdd {

/// Pairwise (tree) summation. Deterministic for a fixed element order and
/// O(log n) rounding-error growth, which matters for traces over
/// concat-mode dimensions up to K*J.
double pairwise_sum(std::span<const double> v);

double trace_pairwise(const Eigen::MatrixXd& m);

/// ||a - b||^2 accumulated pairwise.
double squared_distance_pairwise(const Eigen::VectorXd& a,
                                 const Eigen::VectorXd& b);

}  // namespace fdd
