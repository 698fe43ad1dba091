#include "gwrdt/spectral.hpp"

#include <cmath>

#include "gwrdt/error.hpp"
#include "gwrdt/format.hpp"

namespace gwrdt {

namespace {

struct PowerRun {
  Eigen::VectorXd x;
  double eigenvalue = 0.0;
  double residual = 0.0;
  long iterations = 0;
  bool converged = false;
};

PowerRun power_iterate(const Eigen::MatrixXd& m, Eigen::VectorXd x, double shift, const PerronOptions& opts) {
  PowerRun run;
  x /= x.sum();
  for (long it = 1; it <= opts.max_iters; ++it) {
    Eigen::VectorXd y = m * x;
    const double lambda = y.sum();
    const double residual = (y - lambda * x).cwiseAbs().maxCoeff();
    run.iterations = it;
    run.eigenvalue = lambda;
    run.residual = residual;
    if (residual <= opts.tol) {
      run.converged = true;
      break;
    }
    x = y + shift * x;
    x /= x.sum();
  }
  run.x = std::move(x);
  return run;
}

}  // namespace

PerronData perron(const Eigen::MatrixXd& input, Orientation orientation, PerronOptions opts) {
  if (input.rows() != input.cols() || input.rows() == 0)
    fail(ErrorCode::InvalidParameter, "Perron iteration needs a non-empty square matrix");
  if (!input.allFinite() || (input.array() < 0.0).any())
    fail(ErrorCode::InvalidParameter, "Perron iteration needs a finite nonnegative matrix");
  if ((input.array() == 0.0).all()) fail(ErrorCode::DegenerateMatrix, "zero matrix has no Perron vector");

  const Eigen::MatrixXd m = orientation == Orientation::Right ? input : Eigen::MatrixXd(input.transpose());
  const auto n = m.rows();
  // Shifting by half the largest row sum keeps the Perron vector, moves every
  // other eigenvalue strictly inside the Perron circle, and breaks periodicity.
  const double shift = 0.5 * m.rowwise().sum().maxCoeff();

  PowerRun run = power_iterate(m, Eigen::VectorXd::Ones(n), shift, opts);
  if (!run.converged)
    fail(ErrorCode::NoConvergence, "power iteration stopped after " + std::to_string(run.iterations) +
                                       " iterations with residual " + format_double(run.residual));

  PerronData out;
  out.eigenvalue = run.eigenvalue;
  out.pi = run.x.cwiseMax(0.0);
  out.pi /= out.pi.sum();
  out.orientation = orientation;
  out.iterations = run.iterations;
  out.residual = run.residual;

  // A second, non-uniform start exposes a dominant eigenspace of dimension > 1.
  if (n > 1) {
    Eigen::VectorXd start = Eigen::VectorXd::LinSpaced(n, 1.0, static_cast<double>(n));
    PowerRun other = power_iterate(m, start, shift, opts);
    if (other.converged && (other.x - run.x).cwiseAbs().maxCoeff() > 1e-6) out.unique = false;
  }
  return out;
}

PairMatrix pair_matrix(const KernelTable& kx, const KernelTable& ky) {
  if (kx.types() != ky.types())
    fail(ErrorCode::AlphabetMismatch, "kernels have " + std::to_string(kx.types()) + " and " +
                                          std::to_string(ky.types()) + " types");
  const std::size_t k = kx.types();
  PairMatrix pm(k, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k * k), static_cast<Eigen::Index>(k * k)));
  Eigen::MatrixXd entries = pm.entries();
  for (std::size_t b = 0; b < k; ++b) {
    for (std::size_t b2 = 0; b2 < k; ++b2) {
      const auto col = static_cast<Eigen::Index>(pm.index(static_cast<TypeIndex>(b), static_cast<TypeIndex>(b2)));
      for (const auto& cx : kx.atoms(static_cast<TypeIndex>(b))) {
        for (const auto& cy : ky.atoms(static_cast<TypeIndex>(b2))) {
          const double w = cx.p * cy.p;
          // Iterating over child occurrences accumulates m(a,c) m(a',c') w.
          for (TypeIndex a : cx.children)
            for (TypeIndex a2 : cy.children) entries(static_cast<Eigen::Index>(pm.index(a, a2)), col) += w;
        }
      }
    }
  }
  return PairMatrix(k, std::move(entries));
}

PairMatrix pair_matrix(const GWModel& mx, const GWModel& my) {
  if (!(mx.alphabet == my.alphabet)) fail(ErrorCode::AlphabetMismatch, "models use different alphabets");
  return pair_matrix(mx.kernel, my.kernel);
}

void fill_marginals(PerronData& data, std::size_t types) {
  const auto k = static_cast<Eigen::Index>(types);
  if (data.pi.size() != k * k) fail(ErrorCode::SizeMismatch, "vector is not indexed by type pairs");
  data.pi1 = Eigen::VectorXd::Zero(k);
  data.pi2 = Eigen::VectorXd::Zero(k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index a2 = 0; a2 < k; ++a2) {
      data.pi1(a) += data.pi(a * k + a2);
      data.pi2(a2) += data.pi(a * k + a2);
    }
}

PerronData stationary_pair(const GWModel& mx, const GWModel& my, PerronOptions opts, double crit_tol) {
  const PairMatrix pm = pair_matrix(mx, my);
  PerronData pd = perron(pm.displayed(), Orientation::Right, opts);
  if (std::abs(pd.eigenvalue - 1.0) > crit_tol)
    fail(ErrorCode::NotCritical, "pair-matrix Perron eigenvalue " + format_double(pd.eigenvalue) +
                                     " is not within " + format_double(crit_tol) + " of 1");
  fill_marginals(pd, pm.types());
  return pd;
}

PerronData stationary_pair_left(const GWModel& mx, const GWModel& my, PerronOptions opts) {
  const PairMatrix pm = pair_matrix(mx, my);
  PerronData pd = perron(pm.displayed(), Orientation::Left, opts);
  fill_marginals(pd, pm.types());
  return pd;
}

std::vector<double> stationary_type_law(const GWModel& model, PerronOptions opts) {
  PerronData pd = perron(mean_matrix(model), Orientation::Left, opts);
  return {pd.pi.data(), pd.pi.data() + pd.pi.size()};
}

}  // namespace gwrdt
