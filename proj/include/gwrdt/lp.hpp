#pragma once

#include <optional>

#include <Eigen/Core>

namespace gwrdt {

struct LpSolution {
  double value = 0.0;
  /// An optimal vertex.
  Eigen::VectorXd x;
};

/// min c.x subject to A x = b, x >= 0, by the two-phase dense simplex method
/// with Bland's rule. Returns nullopt when infeasible. Throws OptFailed when
/// the problem is unbounded; the problems solved here live on a simplex.
std::optional<LpSolution> lp_minimize(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c);

}  // namespace gwrdt
