#include "fdd/numeric.hpp"

#include <vector>

namespace fdd {

namespace {

double pairwise_sum_impl(const double* v, std::size_t n) {
  if (n <= 32) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_impl(v, half) + pairwise_sum_impl(v + half, n - half);
}

}  // namespace

double pairwise_sum(std::span<const double> v) {
  return pairwise_sum_impl(v.data(), v.size());
}

double trace_pairwise(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd d = m.diagonal();
  return pairwise_sum(std::span<const double>(d.data(),
                                              static_cast<std::size_t>(d.size())));
}

double squared_distance_pairwise(const Eigen::VectorXd& a,
                                 const Eigen::VectorXd& b) {
  const Eigen::VectorXd sq = (a - b).array().square();
  return pairwise_sum(std::span<const double>(sq.data(),
                                              static_cast<std::size_t>(sq.size())));
}

}  // namespace fdd
