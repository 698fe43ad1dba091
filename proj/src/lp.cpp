#include "gwrdt/lp.hpp"

#include <cmath>
#include <vector>

#include "gwrdt/error.hpp"

namespace gwrdt {

namespace {

constexpr double kEps = 1e-11;
constexpr long kMaxPivots = 200000;

// Dense tableau: rows 0..m-1 are constraints, row m holds reduced costs, the
// last column is the right-hand side.
struct Tableau {
  Eigen::MatrixXd t;
  std::vector<Eigen::Index> basis;
  Eigen::Index m = 0;
  Eigen::Index rhs = 0;

  void pivot(Eigen::Index r, Eigen::Index col) {
    t.row(r) /= t(r, col);
    for (Eigen::Index i = 0; i <= m; ++i)
      if (i != r && t(i, col) != 0.0) t.row(i) -= t(i, col) * t.row(r);
    basis[static_cast<std::size_t>(r)] = col;
  }

  // Bland's rule over columns [0, allowed).
  void run(Eigen::Index allowed) {
    for (long it = 0; it < kMaxPivots; ++it) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < allowed; ++j)
        if (t(m, j) < -kEps) {
          enter = j;
          break;
        }
      if (enter < 0) return;
      Eigen::Index leave = -1;
      double best = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (t(i, enter) <= kEps) continue;
        const double ratio = t(i, rhs) / t(i, enter);
        if (leave < 0 || ratio < best - kEps ||
            (ratio <= best + kEps && basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
          leave = i;
          best = ratio;
        }
      }
      if (leave < 0) fail(ErrorCode::OptFailed, "linear program is unbounded");
      pivot(leave, enter);
    }
    fail(ErrorCode::OptFailed, "simplex exceeded the pivot limit");
  }
};

}  // namespace

std::optional<LpSolution> lp_minimize(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  if (b.size() != m || c.size() != n) fail(ErrorCode::SizeMismatch, "linear program dimensions disagree");

  Tableau tab;
  tab.m = m;
  tab.rhs = n + m;
  tab.t = Eigen::MatrixXd::Zero(m + 1, n + m + 1);
  tab.basis.resize(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    const double sign = b(i) < 0.0 ? -1.0 : 1.0;
    tab.t.row(i).head(n) = sign * a.row(i);
    tab.t(i, n + i) = 1.0;
    tab.t(i, tab.rhs) = sign * b(i);
    tab.basis[static_cast<std::size_t>(i)] = n + i;
  }
  // Phase 1: minimize the sum of artificial variables.
  for (Eigen::Index i = 0; i < m; ++i) {
    tab.t.row(m).head(n) -= tab.t.row(i).head(n);
    tab.t(m, tab.rhs) -= tab.t(i, tab.rhs);
  }
  tab.run(n + m);
  const double scale = 1.0 + b.cwiseAbs().sum();
  if (-tab.t(m, tab.rhs) > 1e-9 * scale) return std::nullopt;

  // Drive artificials out of the basis; rows where that is impossible are
  // redundant and keep a zero-valued artificial.
  for (Eigen::Index i = 0; i < m; ++i) {
    if (tab.basis[static_cast<std::size_t>(i)] < n) continue;
    for (Eigen::Index j = 0; j < n; ++j)
      if (std::abs(tab.t(i, j)) > 1e-9) {
        tab.pivot(i, j);
        break;
      }
  }

  // Phase 2 on the original columns only.
  tab.t.row(m).setZero();
  tab.t.row(m).head(n) = c.transpose();
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index col = tab.basis[static_cast<std::size_t>(i)];
    if (col < n && c(col) != 0.0) tab.t.row(m) -= c(col) * tab.t.row(i);
  }
  tab.run(n);

  LpSolution sol;
  sol.x = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index col = tab.basis[static_cast<std::size_t>(i)];
    if (col < n) sol.x(col) = std::max(0.0, tab.t(i, tab.rhs));
  }
  sol.value = c.dot(sol.x);
  return sol;
}

}  // namespace gwrdt
