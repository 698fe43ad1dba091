#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "gwrdt/model.hpp"

namespace gwrdt {

enum class Orientation { Left, Right };

struct PerronOptions {
  double tol = 1e-12;
  long max_iters = 100000;
};

struct PerronData {
  double eigenvalue = 0.0;
  /// Probability-normalized Perron vector.
  Eigen::VectorXd pi;
  /// Coordinate marginals when pi lives on type pairs; empty otherwise.
  Eigen::VectorXd pi1;
  Eigen::VectorXd pi2;
  Orientation orientation = Orientation::Right;
  long iterations = 0;
  /// max |M pi - lambda pi| (or its transpose for Left).
  double residual = 0.0;
  /// False when a second start vector converged to a different eigenvector,
  /// i.e. the dominant eigenspace is not one-dimensional.
  bool unique = true;
};

/// Power iteration for the Perron root and vector of a nonnegative matrix.
/// Iterates with the shifted matrix M + s I (s = half the max row sum), which has the
/// same Perron vector and is aperiodic, from the uniform start vector; a
/// second start checks that the dominant eigenspace is one-dimensional.
/// Throws DegenerateMatrix for a zero matrix and NoConvergence when the
/// residual is still above tol after max_iters.
PerronData perron(const Eigen::MatrixXd& m, Orientation orientation, PerronOptions opts = {});

/// The pair matrix on type pairs, stored in its defining orientation:
///   A[(a,a'),(b,b')] = sum_{c,c'} m(a,c) m(a',c') Kx{c|b} Ky{c'|b'}.
/// Type pair (a,a') has flat index a * types + a'.
class PairMatrix {
 public:
  PairMatrix(std::size_t types, Eigen::MatrixXd entries) : types_(types), entries_(std::move(entries)) {}

  std::size_t types() const { return types_; }
  std::size_t index(TypeIndex a, TypeIndex a2) const { return static_cast<std::size_t>(a) * types_ + static_cast<std::size_t>(a2); }
  const Eigen::MatrixXd& entries() const { return entries_; }
  /// Rows indexed by the parent pair (b,b'); the transpose of entries().
  Eigen::MatrixXd displayed() const { return entries_.transpose(); }

 private:
  std::size_t types_;
  Eigen::MatrixXd entries_;
};

/// Evaluates the defining double sum over offspring-string pairs.
/// Throws AlphabetMismatch when the kernels have different type counts.
PairMatrix pair_matrix(const KernelTable& kx, const KernelTable& ky);
/// Same, additionally requiring identical alphabets.
PairMatrix pair_matrix(const GWModel& mx, const GWModel& my);

/// Splits a probability vector on type pairs into its two marginals.
void fill_marginals(PerronData& data, std::size_t types);

/// Right Perron vector of the displayed (parent-pair-row) orientation, with
/// marginals. Throws NotCritical if |lambda - 1| > crit_tol.
PerronData stationary_pair(const GWModel& mx, const GWModel& my, PerronOptions opts = {},
                           double crit_tol = kDefaultCriticalityTol);

/// Left Perron vector of the displayed orientation: the fixed point of
/// pi(a,a') = sum A[(a,a'),(b,b')] pi(b,b'), i.e. the stationary type-pair law.
PerronData stationary_pair_left(const GWModel& mx, const GWModel& my, PerronOptions opts = {});

/// Stationary type law of one process: q with q(a) = sum_b q(b) m(b,a).
std::vector<double> stationary_type_law(const GWModel& model, PerronOptions opts = {});

}  // namespace gwrdt
