#include "gwrdt/ratefn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "gwrdt/error.hpp"
#include "gwrdt/format.hpp"
#include "gwrdt/lp.hpp"
#include "gwrdt/parallel.hpp"
#include "gwrdt/rng.hpp"

namespace gwrdt {

// ---------------------------------------------------------------------------
// Relative entropy and I1 / I2

namespace {

bool normalized(std::span<const double> p) {
  double s = 0.0;
  for (double x : p) s += x;
  return std::abs(s - 1.0) <= 1e-9;
}

}  // namespace

ExtReal rel_entropy(std::span<const double> nu, std::span<const double> mu) {
  if (nu.size() != mu.size())
    fail(ErrorCode::SizeMismatch, "measures have " + std::to_string(nu.size()) + " and " + std::to_string(mu.size()) +
                                      " entries");
  double s = 0.0;
  for (std::size_t i = 0; i < nu.size(); ++i) {
    if (nu[i] <= 0.0) continue;
    if (mu[i] <= 0.0) return ExtReal::infinity();
    s += nu[i] * std::log(nu[i] / mu[i]);
  }
  // Rounding can push H(p||p) a few ulps below zero.
  if (normalized(nu) && normalized(mu)) s = std::max(s, 0.0);
  return s;
}

ExtReal rel_entropy(const MarkMeasure& nu, const MarkMeasure& mu) {
  std::vector<double> a;
  std::vector<double> b;
  for (const auto& [k, w] : nu) {
    a.push_back(w);
    auto it = mu.find(k);
    b.push_back(it == mu.end() ? 0.0 : it->second);
  }
  // Mass of mu off the support of nu still counts toward normalization.
  double rest = 0.0;
  for (const auto& [k, w] : mu)
    if (!nu.count(k)) rest += w;
  a.push_back(0.0);
  b.push_back(rest);
  return rel_entropy(a, b);
}

namespace {

PairMeasure as_marked(const PairMeasure& mu) {
  return mu.view() == MeasureView::MarkedPair ? mu : reindex(mu);
}

}  // namespace

RateValue rate_I1(const PairMeasure& nu, const KernelTable& kx, const KernelTable& ky, double tol) {
  if (kx.types() != ky.types()) fail(ErrorCode::AlphabetMismatch, "kernels have different type counts");
  const std::size_t k = kx.types();
  RateValue out;
  const PairMeasure marked = as_marked(nu);
  out.defect = shift_defect(marked, k);
  out.argmin = nu;
  if (out.defect.max_defect > tol) {
    out.value = ExtReal::infinity();
    return out;
  }
  const auto q1 = type_marginal(mark_marginal(marked, 1), k);
  const auto q2 = type_marginal(mark_marginal(marked, 2), k);
  std::vector<double> a;
  std::vector<double> b;
  double base_total = 0.0;
  for (const auto& [key, w] : marked.marked()) {
    const double base = q1[static_cast<std::size_t>(key.x.type)] * kx.prob(key.x.type, key.x.offspring) *
                        q2[static_cast<std::size_t>(key.y.type)] * ky.prob(key.y.type, key.y.offspring);
    a.push_back(w);
    b.push_back(base);
    base_total += base;
  }
  a.push_back(0.0);
  b.push_back(std::max(0.0, 1.0 - base_total));
  out.value = rel_entropy(a, b);
  return out;
}

RateValue rate_I2(const PairMeasure& omega, const KernelTable& kx, const KernelTable& ky, double tol) {
  if (kx.types() != ky.types()) fail(ErrorCode::AlphabetMismatch, "kernels have different type counts");
  const std::size_t k = kx.types();
  RateValue out;
  out.defect = shift_defect(reindex(omega), k);
  out.argmin = omega;
  if (out.defect.max_defect > tol) {
    out.value = ExtReal::infinity();
    return out;
  }
  const auto w1 = type_pair_marginal(omega, k);
  const PairMeasure paired = omega.view() == MeasureView::PairedMarks ? omega : reindex(omega);
  std::vector<double> a;
  std::vector<double> b;
  double base_total = 0.0;
  for (const auto& [key, w] : paired.paired()) {
    const double base = w1[static_cast<std::size_t>(key.type_x) * k + static_cast<std::size_t>(key.type_y)] *
                        kx.prob(key.type_x, key.offspring_x) * ky.prob(key.type_y, key.offspring_y);
    a.push_back(w);
    b.push_back(base);
    base_total += base;
  }
  a.push_back(0.0);
  b.push_back(std::max(0.0, 1.0 - base_total));
  out.value = rel_entropy(a, b);
  return out;
}

MarkSpace::MarkSpace(const KernelTable& kernel) : types(kernel.types()) {
  for (std::size_t a = 0; a < types; ++a)
    for (const auto& atom : kernel.atoms(static_cast<TypeIndex>(a))) {
      marks.push_back({static_cast<TypeIndex>(a), atom.children});
      kernel_prob.push_back(atom.p);
    }
}

std::vector<double> mark_law(const MarkSpace& space, std::span<const double> type_law) {
  if (type_law.size() != space.types)
    fail(ErrorCode::SizeMismatch, "type law has " + std::to_string(type_law.size()) + " entries for " +
                                      std::to_string(space.types) + " types");
  std::vector<double> out(space.size());
  for (std::size_t i = 0; i < space.size(); ++i)
    out[i] = type_law[static_cast<std::size_t>(space.marks[i].type)] * space.kernel_prob[i];
  return out;
}

// ---------------------------------------------------------------------------
// I_rho

IRhoSolver::IRhoSolver(const GWModel& mx, const GWModel& my, const Distortion& rho, IRhoOptions opts)
    : sx_(mx.kernel), sy_(my.kernel), kx_(mx.kernel), ky_(my.kernel), opts_(opts) {
  if (!(mx.alphabet == my.alphabet)) fail(ErrorCode::AlphabetMismatch, "models use different alphabets");
  if (opts.stages < 0 || opts.iters_per_stage < 0 || opts.polish_iters < 1 || opts.penalty_start <= 0.0 ||
      opts.penalty_growth < 1.0 || opts.feasibility_tol <= 0.0)
    fail(ErrorCode::InvalidParameter, "invalid I_rho solver options");
  const std::size_t nx = sx_.size();
  const std::size_t ny = sy_.size();
  const std::size_t k = sx_.types;
  const std::size_t total = nx * ny;
  rho_.resize(total);
  log_kernel_.resize(total);
  shift_rows_.assign(2 * k, std::vector<double>(total, 0.0));
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j) {
      const std::size_t u = i * ny + j;
      const VertexMark& x = sx_.marks[i];
      const VertexMark& y = sy_.marks[j];
      rho_[u] = rho(x, y);
      log_kernel_[u] = std::log(sx_.kernel_prob[i]) + std::log(sy_.kernel_prob[j]);
      // Type mass minus child-weighted mass, per type, on each coordinate.
      shift_rows_[static_cast<std::size_t>(x.type)][u] += 1.0;
      for (TypeIndex c : x.offspring) shift_rows_[static_cast<std::size_t>(c)][u] -= 1.0;
      shift_rows_[k + static_cast<std::size_t>(y.type)][u] += 1.0;
      for (TypeIndex c : y.offspring) shift_rows_[k + static_cast<std::size_t>(c)][u] -= 1.0;
    }

  const auto rows = static_cast<Eigen::Index>(1 + 2 * k);
  Eigen::MatrixXd a(rows, static_cast<Eigen::Index>(total));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
  a.row(0).setOnes();
  b(0) = 1.0;
  for (std::size_t r = 0; r < 2 * k; ++r)
    a.row(static_cast<Eigen::Index>(r + 1)) = Eigen::Map<const Eigen::RowVectorXd>(shift_rows_[r].data(),
                                                                                   static_cast<Eigen::Index>(total));
  const Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(rho_.data(), static_cast<Eigen::Index>(total));
  auto lo = lp_minimize(a, b, c);
  auto hi = lp_minimize(a, b, -c);
  feasible_ = lo && hi;
  if (feasible_) {
    z_min_ = lo->value;
    z_max_ = -hi->value;
  }
}

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Problem {
  MatrixXd g;  // independent constraint rows restricted to the support
  VectorXd h;
  VectorXd log_kernel;
  std::vector<std::size_t> type_x;
  std::vector<std::size_t> type_y;
  std::size_t types = 0;
};

// Greedy Gram-Schmidt row selection.
void keep_independent(MatrixXd& g, VectorXd& h) {
  std::vector<VectorXd> basis;
  std::vector<Index> keep;
  for (Index r = 0; r < g.rows(); ++r) {
    VectorXd v = g.row(r).transpose();
    const double norm = v.norm();
    if (norm == 0.0) continue;
    for (const auto& e : basis) v -= e.dot(v) * e;
    if (v.norm() > 1e-9 * norm) {
      basis.push_back(v / v.norm());
      keep.push_back(r);
    }
  }
  MatrixXd g2(static_cast<Index>(keep.size()), g.cols());
  VectorXd h2(static_cast<Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    g2.row(static_cast<Index>(i)) = g.row(keep[i]);
    h2(static_cast<Index>(i)) = h(keep[i]);
  }
  g = std::move(g2);
  h = std::move(h2);
}

void type_marginals(const Problem& p, const VectorXd& nu, std::vector<double>& q1, std::vector<double>& q2) {
  q1.assign(p.types, 0.0);
  q2.assign(p.types, 0.0);
  for (Index u = 0; u < nu.size(); ++u) {
    q1[p.type_x[static_cast<std::size_t>(u)]] += nu(u);
    q2[p.type_y[static_cast<std::size_t>(u)]] += nu(u);
  }
}

VectorXd log_base(const Problem& p, const VectorXd& nu) {
  std::vector<double> q1;
  std::vector<double> q2;
  type_marginals(p, nu, q1, q2);
  VectorXd lb(nu.size());
  for (Index u = 0; u < nu.size(); ++u) {
    const double a = q1[p.type_x[static_cast<std::size_t>(u)]];
    const double b = q2[p.type_y[static_cast<std::size_t>(u)]];
    lb(u) = (a > 0.0 && b > 0.0) ? std::log(a) + std::log(b) + p.log_kernel(u)
                                 : -std::numeric_limits<double>::infinity();
  }
  return lb;
}

double objective(const Problem& p, const VectorXd& nu) {
  const VectorXd lb = log_base(p, nu);
  double s = 0.0;
  for (Index u = 0; u < nu.size(); ++u)
    if (nu(u) > 0.0) s += nu(u) * (std::log(nu(u)) - lb(u));
  return std::max(s, 0.0);
}

// I-projection of exp(lb) onto {nu : g nu = h} by Newton's method on the dual.
bool project(const Problem& p, const VectorXd& lb, VectorXd& lambda, VectorXd& nu) {
  auto primal = [&](const VectorXd& lam) {
    VectorXd e = lb + p.g.transpose() * lam;
    return VectorXd(e.cwiseMin(700.0).array().exp());
  };
  auto dual = [&](const VectorXd& lam, const VectorXd& v) { return lam.dot(p.h) - v.sum(); };
  nu = primal(lambda);
  double value = dual(lambda, nu);
  for (int it = 0; it < 200; ++it) {
    const VectorXd grad = p.h - p.g * nu;
    if (grad.cwiseAbs().maxCoeff() <= 1e-14) return true;
    const MatrixXd hess = p.g * nu.asDiagonal() * p.g.transpose();
    Eigen::LDLT<MatrixXd> ldlt(hess);
    VectorXd step = ldlt.solve(grad);
    if (!step.allFinite()) return false;
    double s = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, s *= 0.5) {
      const VectorXd cand = lambda + s * step;
      const VectorXd v = primal(cand);
      const double dv = dual(cand, v);
      if (std::isfinite(dv) && dv >= value - 1e-15 * (1.0 + std::abs(value))) {
        lambda = cand;
        nu = v;
        moved = dv > value;
        value = dv;
        break;
      }
    }
    if (!moved) return (p.h - p.g * nu).cwiseAbs().maxCoeff() <= 1e-11;
  }
  return (p.h - p.g * nu).cwiseAbs().maxCoeff() <= 1e-11;
}

struct PolishResult {
  VectorXd nu;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool ok = false;
};

// Alternates q <- type marginals of nu and nu <- I-projection of base(q).
// Each step lowers H(nu || base(marginals(nu))).
PolishResult polish(const Problem& p, VectorXd nu, const IRhoOptions& opts) {
  PolishResult r;
  VectorXd lambda = VectorXd::Zero(p.g.rows());
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opts.polish_iters; ++it) {
    VectorXd next;
    if (!project(p, log_base(p, nu), lambda, next)) {
      lambda.setZero();
      if (!project(p, log_base(p, nu), lambda, next)) break;
    }
    nu = next;
    const double value = objective(p, nu);
    r.iterations = it;
    r.ok = true;
    r.nu = nu;
    r.value = value;
    if (prev - value <= opts.polish_tol * std::max(1.0, value)) break;
    prev = value;
  }
  return r;
}

// Entropic mirror descent on the simplex with quadratic penalties.
VectorXd mirror_descent(const Problem& p, const IRhoOptions& opts) {
  const Index n = p.g.cols();
  VectorXd nu = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  double lipschitz = 0.0;
  for (Index r = 0; r < p.g.rows(); ++r) lipschitz += p.g.row(r).cwiseAbs2().maxCoeff();
  double penalty = opts.penalty_start;
  for (int stage = 0; stage < opts.stages; ++stage, penalty *= opts.penalty_growth) {
    const double eta = std::min(0.5, 1.0 / (1.0 + penalty * lipschitz));
    for (int it = 0; it < opts.iters_per_stage; ++it) {
      const VectorXd lb = log_base(p, nu);
      const VectorXd grad = (nu.array().log() - lb.array()).matrix() + penalty * p.g.transpose() * (p.g * nu - p.h);
      VectorXd next = (nu.array().log() - eta * grad.array()).matrix();
      next.array() -= next.maxCoeff();
      next = next.array().exp().matrix();
      next /= next.sum();
      next = next.cwiseMax(1e-300);
      nu = next / next.sum();
    }
  }
  return nu;
}

}  // namespace

IRhoResult IRhoSolver::solve(double z) const {
  IRhoResult out;
  out.z_min = z_min_;
  out.z_max = z_max_;
  const double slack = 1e-12 * (1.0 + std::abs(z));
  if (!feasible_ || !std::isfinite(z) || z < z_min_ - slack || z > z_max_ + slack) {
    out.rate.value = ExtReal::infinity();
    return out;
  }
  z = std::clamp(z, z_min_, z_max_);

  const std::size_t total = rho_.size();
  const std::size_t k = sx_.types;
  const std::size_t ny = sy_.size();
  const auto rows = static_cast<Index>(2 + 2 * k);
  MatrixXd a(rows, static_cast<Index>(total));
  VectorXd b = VectorXd::Zero(rows);
  a.row(0).setOnes();
  b(0) = 1.0;
  for (std::size_t r = 0; r < 2 * k; ++r)
    a.row(static_cast<Index>(r + 1)) =
        Eigen::Map<const Eigen::RowVectorXd>(shift_rows_[r].data(), static_cast<Index>(total));
  a.row(rows - 1) = Eigen::Map<const Eigen::RowVectorXd>(rho_.data(), static_cast<Index>(total));
  b(rows - 1) = z;

  // Support of the relative interior of the feasible polytope: coordinates
  // that some feasible point charges.
  std::vector<char> in_support(total, 0);
  for (std::size_t u = 0; u < total; ++u) {
    if (in_support[u]) continue;
    VectorXd c = VectorXd::Zero(static_cast<Index>(total));
    c(static_cast<Index>(u)) = -1.0;
    auto sol = lp_minimize(a, b, c);
    if (!sol) {
      out.rate.value = ExtReal::infinity();
      return out;
    }
    for (std::size_t v = 0; v < total; ++v)
      if (sol->x(static_cast<Index>(v)) > 1e-12) in_support[v] = 1;
  }
  std::vector<std::size_t> support;
  for (std::size_t u = 0; u < total; ++u)
    if (in_support[u]) support.push_back(u);

  Problem p;
  p.types = k;
  const auto s = static_cast<Index>(support.size());
  p.g.resize(rows, s);
  p.h = b;
  p.log_kernel.resize(s);
  for (Index col = 0; col < s; ++col) {
    const std::size_t u = support[static_cast<std::size_t>(col)];
    p.g.col(col) = a.col(static_cast<Index>(u));
    p.log_kernel(col) = log_kernel_[u];
    p.type_x.push_back(static_cast<std::size_t>(sx_.marks[u / ny].type));
    p.type_y.push_back(static_cast<std::size_t>(sy_.marks[u % ny].type));
  }
  keep_independent(p.g, p.h);

  // Two starts: the penalized mirror-descent iterate and the maximum-entropy
  // feasible point. The objective is not convex in general.
  PolishResult best;
  {
    PolishResult r = polish(p, mirror_descent(p, opts_), opts_);
    if (r.ok) best = r;
  }
  {
    Problem flat = p;
    flat.log_kernel.setZero();
    VectorXd lambda = VectorXd::Zero(p.g.rows());
    VectorXd start;
    if (project(flat, VectorXd::Zero(s), lambda, start)) {
      PolishResult r = polish(p, start, opts_);
      if (r.ok && r.value < best.value) best = r;
    }
  }
  if (!best.ok) fail(ErrorCode::OptFailed, "I-projection failed at z = " + format_double(z));

  VectorXd full = VectorXd::Zero(static_cast<Index>(total));
  for (Index col = 0; col < s; ++col) full(static_cast<Index>(support[static_cast<std::size_t>(col)])) = best.nu(col);
  out.constraint_residual = (a * full - b).cwiseAbs().maxCoeff();
  out.polish_iterations = best.iterations;
  if (out.constraint_residual > opts_.feasibility_tol)
    fail(ErrorCode::OptFailed, "constraint residual " + format_double(out.constraint_residual) + " at z = " +
                                   format_double(z) + " (best objective " + format_double(best.value) + ")");

  PairMeasure::MarkedTable table;
  for (std::size_t u = 0; u < total; ++u)
    if (full(static_cast<Index>(u)) > 0.0) table[{sx_.marks[u / ny], sy_.marks[u % ny]}] = full(static_cast<Index>(u));
  PairMeasure argmin(std::move(table));
  out.rate.defect = shift_defect(argmin, k);
  out.rate.value = best.value;
  out.rate.argmin = std::move(argmin);
  return out;
}

IRhoResult i_rho(double z, const GWModel& mx, const GWModel& my, const Distortion& rho, IRhoOptions opts) {
  return IRhoSolver(mx, my, rho, opts).solve(z);
}

// ---------------------------------------------------------------------------
// Lambda_inf

namespace {

double log_sum_exp_weighted(const std::vector<double>& w, const std::vector<double>& r, double t) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < w.size(); ++i) m = std::max(m, t * r[i]);
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * std::exp(t * r[i] - m);
  return m + std::log(s);
}

double tilted_mean(const std::vector<double>& w, const std::vector<double>& r, double t) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < w.size(); ++i) m = std::max(m, t * r[i]);
  double s = 0.0;
  double sr = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double e = w[i] * std::exp(t * r[i] - m);
    s += e;
    sr += e * r[i];
  }
  return sr / s;
}

}  // namespace

LambdaInf::LambdaInf(const PerronData& pi, const KernelTable& kx, const KernelTable& ky, const Distortion& rho,
                     LambdaOrder order) {
  if (kx.types() != ky.types()) fail(ErrorCode::AlphabetMismatch, "kernels have different type counts");
  if (pi.pi1.size() != static_cast<Index>(kx.types()) || pi.pi2.size() != static_cast<Index>(ky.types()))
    fail(ErrorCode::SizeMismatch, "Perron marginals do not match the type count");
  const MarkSpace sx(kx);
  const MarkSpace sy(ky);
  const auto wx = mark_law(sx, std::span<const double>(pi.pi1.data(), static_cast<std::size_t>(pi.pi1.size())));
  const auto wy = mark_law(sy, std::span<const double>(pi.pi2.data(), static_cast<std::size_t>(pi.pi2.size())));
  const bool source_inner = order == LambdaOrder::SourceInner;
  const MarkSpace& so = source_inner ? sy : sx;
  const MarkSpace& si = source_inner ? sx : sy;
  const auto& wo = source_inner ? wy : wx;
  const auto& wi = source_inner ? wx : wy;
  std::vector<std::size_t> inner_idx;
  for (std::size_t i = 0; i < si.size(); ++i)
    if (wi[i] > 0.0) {
      inner_idx.push_back(i);
      inner_.push_back(wi[i]);
    }
  for (std::size_t o = 0; o < so.size(); ++o) {
    if (wo[o] <= 0.0) continue;
    outer_.push_back(wo[o]);
    std::vector<double> row;
    for (std::size_t i : inner_idx)
      row.push_back(source_inner ? rho(si.marks[i], so.marks[o]) : rho(so.marks[o], si.marks[i]));
    rho_.push_back(std::move(row));
  }
  if (outer_.empty() || inner_.empty()) fail(ErrorCode::DegenerateMatrix, "stationary mark laws have no mass");
}

double LambdaInf::value(double t) const {
  if (t == 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t o = 0; o < outer_.size(); ++o) s += outer_[o] * log_sum_exp_weighted(inner_, rho_[o], t);
  return s;
}

double LambdaInf::derivative(double t) const {
  double s = 0.0;
  for (std::size_t o = 0; o < outer_.size(); ++o) s += outer_[o] * tilted_mean(inner_, rho_[o], t);
  return s;
}

double LambdaInf::slope_at_minus_infinity() const {
  double s = 0.0;
  for (std::size_t o = 0; o < outer_.size(); ++o) s += outer_[o] * *std::min_element(rho_[o].begin(), rho_[o].end());
  return s;
}

double LambdaInf::mean() const { return derivative(0.0); }

double lambda_inf(double t, const PerronData& pi, const KernelTable& kx, const KernelTable& ky,
                  const Distortion& rho, LambdaOrder order) {
  return LambdaInf(pi, kx, ky, rho, order).value(t);
}

double d_average(const PerronData& pi, const KernelTable& kx, const KernelTable& ky, const Distortion& rho) {
  return LambdaInf(pi, kx, ky, rho).mean();
}

// ---------------------------------------------------------------------------
// Finite-n log-MGF

// The weights are a probability law, so the value at t = 0 is 0 whatever
// rounding their sum carries.
double DistortionProfile::log_mgf(double t) const {
  return t == 0.0 ? 0.0 : log_sum_exp_weighted(weights, totals, t);
}

double DistortionProfile::log_mgf_derivative(double t) const { return tilted_mean(weights, totals, t); }

namespace {

double total_slack(double x) { return 1e-9 * std::max(1.0, std::abs(x)); }

}  // namespace

double DistortionProfile::cdf(double limit) const {
  double s = 0.0;
  for (std::size_t i = 0; i < totals.size() && totals[i] <= limit + total_slack(limit); ++i) s += weights[i];
  return std::min(s, 1.0);
}

double DistortionProfile::open_interval(double lo, double hi) const {
  double s = 0.0;
  for (std::size_t i = 0; i < totals.size(); ++i)
    if (totals[i] > lo + total_slack(lo) && totals[i] < hi - total_slack(hi)) s += weights[i];
  return std::min(s, 1.0);
}

double DistortionProfile::mean() const {
  double s = 0.0;
  for (std::size_t i = 0; i < totals.size(); ++i) s += weights[i] * totals[i];
  return s;
}

CodebookEnsemble::CodebookEnsemble(const GWModel& my, std::size_t n, std::size_t budget)
    : CodebookEnsemble(n, [&] {
        auto list = enumerate_trees(my, n, budget);
        if (list.items.empty())
          fail(ErrorCode::NoSuchSize, "no tree of size " + std::to_string(n) + " has positive probability");
        return std::move(list.items);
      }()) {}

CodebookEnsemble::CodebookEnsemble(std::size_t n, const std::vector<WeightedTree>& items) : n_(n) {
  if (items.empty()) fail(ErrorCode::InvalidParameter, "empty codebook ensemble");
  std::map<VertexMark, std::uint32_t> index;
  double total = 0.0;
  for (const auto& item : items) {
    if (item.tree.size() != n)
      fail(ErrorCode::SizeMismatch, "ensemble tree has " + std::to_string(item.tree.size()) + " vertices, expected " +
                                        std::to_string(n));
    for (auto& mark : vertex_marks(item.tree)) {
      auto [it, inserted] = index.emplace(std::move(mark), static_cast<std::uint32_t>(index.size()));
      ids_.push_back(it->second);
    }
    weights_.push_back(item.prob);
    total += item.prob;
  }
  if (!(total > 0.0)) fail(ErrorCode::InvalidParameter, "codebook ensemble has no mass");
  for (double& w : weights_) w /= total;
  marks_.resize(index.size());
  for (const auto& [mark, id] : index) marks_[id] = mark;
}

DistortionProfile CodebookEnsemble::profile(const Tree& x, const Distortion& rho) const {
  if (x.size() != n_)
    fail(ErrorCode::SizeMismatch, "tree has " + std::to_string(x.size()) + " vertices, ensemble is for " +
                                      std::to_string(n_));
  const auto xm = vertex_marks(x);
  const std::size_t m = marks_.size();
  std::vector<double> table(n_ * m);
  for (std::size_t v = 0; v < n_; ++v)
    for (std::size_t id = 0; id < m; ++id) table[v * m + id] = rho(xm[v], marks_[id]);
  std::vector<std::pair<double, double>> atoms(weights_.size());
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    double d = 0.0;
    const std::uint32_t* ids = ids_.data() + k * n_;
    for (std::size_t v = 0; v < n_; ++v) d += table[v * m + ids[v]];
    atoms[k] = {d, weights_[k]};
  }
  std::sort(atoms.begin(), atoms.end());
  DistortionProfile p;
  for (const auto& [d, w] : atoms) {
    if (!p.totals.empty() && d - p.totals.back() <= 1e-12 * std::max(1.0, std::abs(d))) {
      p.weights.back() += w;
    } else {
      p.totals.push_back(d);
      p.weights.push_back(w);
    }
  }
  return p;
}

LambdaN::LambdaN(const GWModel& mx, const GWModel& my, std::size_t n, const Distortion& rho, LambdaNOptions opts)
    : n_(n), mode_(opts.mode) {
  if (n == 0) fail(ErrorCode::InvalidParameter, "n must be at least 1");
  if (!(mx.alphabet == my.alphabet)) fail(ErrorCode::AlphabetMismatch, "models use different alphabets");
  if (opts.mode == EvalMode::Exact) {
    const CodebookEnsemble ens(my, n, opts.budget);
    auto xs = enumerate_trees(mx, n, opts.budget);
    if (xs.items.empty())
      fail(ErrorCode::NoSuchSize, "no tree of size " + std::to_string(n) + " has positive probability");
    profiles_.resize(xs.items.size());
    weights_.resize(xs.items.size());
    parallel_for(xs.items.size(), opts.threads, [&](std::size_t i) {
      profiles_[i] = ens.profile(xs.items[i].tree, rho);
      weights_[i] = xs.items[i].prob / xs.total;
    });
    return;
  }

  if (opts.samples == 0) fail(ErrorCode::InvalidParameter, "Monte Carlo mode needs at least one sample");
  const ConditionedSampler proto_x(mx, n, opts.max_rejects);
  std::optional<CodebookEnsemble> ens;
  try {
    ens.emplace(my, n, opts.budget);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::CountExceeded) throw;
  }
  if (!ens) {
    const ConditionedSampler proto_y(my, n, opts.max_rejects);
    std::vector<WeightedTree> ys(opts.samples, WeightedTree{Tree::from_bfs({0}, {0}), 1.0});
    parallel_for(ys.size(), opts.threads, [&](std::size_t j) {
      ConditionedSampler local = proto_y;
      Rng rng(derive_seed(opts.seed, {n, j, 1}));
      ys[j].tree = local.draw(rng);
    });
    ens.emplace(n, ys);
  }
  profiles_.resize(opts.samples);
  weights_.assign(opts.samples, 1.0 / static_cast<double>(opts.samples));
  parallel_for(opts.samples, opts.threads, [&](std::size_t i) {
    ConditionedSampler local = proto_x;
    Rng rng(derive_seed(opts.seed, {n, i, 0}));
    profiles_[i] = ens->profile(local.draw(rng), rho);
  });
}

double LambdaN::value(double t) const {
  if (t == 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < profiles_.size(); ++i) s += weights_[i] * profiles_[i].log_mgf(t);
  return s / static_cast<double>(n_);
}

double LambdaN::derivative(double t) const {
  double s = 0.0;
  for (std::size_t i = 0; i < profiles_.size(); ++i) s += weights_[i] * profiles_[i].log_mgf_derivative(t);
  return s / static_cast<double>(n_);
}

double LambdaN::slope_at_minus_infinity() const {
  double s = 0.0;
  for (std::size_t i = 0; i < profiles_.size(); ++i) s += weights_[i] * profiles_[i].min_total();
  return s / static_cast<double>(n_);
}

double LambdaN::standard_error(double t) const {
  if (mode_ == EvalMode::Exact || profiles_.size() < 2) return 0.0;
  const double mean = value(t);
  double ss = 0.0;
  for (const auto& p : profiles_) {
    const double d = p.log_mgf(t) / static_cast<double>(n_) - mean;
    ss += d * d;
  }
  const auto m = static_cast<double>(profiles_.size());
  return std::sqrt(ss / (m - 1.0) / m);
}

LambdaNValue lambda_n(double t, const GWModel& mx, const GWModel& my, std::size_t n, const Distortion& rho,
                      LambdaNOptions opts) {
  const LambdaN l(mx, my, n, rho, opts);
  return {l.value(t), l.standard_error(t)};
}

double d_min_n(const GWModel& mx, const GWModel& my, std::size_t n, const Distortion& rho, LambdaNOptions opts) {
  return LambdaN(mx, my, n, rho, opts).slope_at_minus_infinity();
}

// ---------------------------------------------------------------------------
// Legendre transform

ExtReal rd_function(double d, const ConvexFunction& lambda, double d_min, double d_av, RdOptions opts) {
  if (!std::isfinite(d)) fail(ErrorCode::InvalidParameter, "distortion level must be finite");
  if (d < d_min) return ExtReal::infinity();
  if (d >= d_av) return 0.0;
  auto phi = [&](double t) { return t * d - lambda.value(t); };

  // Bracket the maximizer: phi'(t) = d - lambda'(t) is positive at t_lo.
  double t_lo = -1.0;
  int doublings = 0;
  while (d - lambda.derivative(t_lo) <= 0.0) {
    if (++doublings > opts.max_bracket_doublings) {
      // At d = d_min the supremum is only approached as t -> -inf.
      if (d - d_min <= 1e-9 * std::max(1.0, std::abs(d))) return std::max(0.0, phi(t_lo));
      fail(ErrorCode::OptFailed, "no bracket for the Legendre transform at d = " + format_double(d));
    }
    t_lo *= 2.0;
  }
  double lo = t_lo;
  double hi = 0.0;

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = phi(x1);
  double f2 = phi(x2);
  const double golden_stop = std::max(opts.tol, 1e-6 * (hi - lo));
  while (hi - lo > golden_stop) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = phi(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = phi(x1);
    }
  }
  // Widen slightly so the bracket surely contains the sign change of phi'.
  const double pad = 2.0 * golden_stop;
  lo = std::max(t_lo, lo - pad);
  hi = std::min(0.0, hi + pad);
  for (int it = 0; it < 200 && hi - lo > opts.tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (d - lambda.derivative(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return std::max(0.0, phi(0.5 * (lo + hi)));
}

double mtdna_threshold(double alpha) {
  const double b = 1.0 - alpha;
  return 0.75 * b + 0.25 * alpha * b * b * b;
}

std::string RDSummary::curve_csv() const {
  std::string s = "d,R\n";
  for (const auto& [d, r] : curve) s += format_double(d) + ',' + r.to_string() + '\n';
  return s;
}

std::string RDSummary::lambda_csv() const {
  std::string s = "t,lambda\n";
  for (const auto& [t, l] : lambda_samples) s += format_double(t) + ',' + format_double(l) + '\n';
  return s;
}

RDSummary rd_summary(const GWModel& mx, const GWModel& my, const Distortion& rho, const RdSummaryOptions& opts) {
  RDSummary out;
  out.order = opts.order;
  const PerronData pi = stationary_pair(mx, my, opts.perron);
  const LambdaInf lam(pi, mx.kernel, my.kernel, rho, opts.order);
  out.d_av = lam.mean();
  out.d_min = lam.slope_at_minus_infinity();
  for (double d : opts.d_grid) out.curve.emplace_back(d, rd_function(d, lam, out.d_min, out.d_av, opts.rd));
  for (double t : opts.t_grid) out.lambda_samples.emplace_back(t, lam.value(t));

  std::vector<char> all_finite(opts.d_grid.size(), 1);
  bool any_n = false;
  for (std::size_t n : opts.n_list) {
    if (!achievable_sizes(mx, n)[n] || !achievable_sizes(my, n)[n]) continue;
    LambdaNOptions lo;
    lo.budget = opts.budget;
    const LambdaN ln(mx, my, n, rho, lo);
    const double dmin = ln.slope_at_minus_infinity();
    const double dav = ln.mean();
    out.d_min_n.emplace_back(n, dmin);
    any_n = true;
    for (std::size_t i = 0; i < opts.d_grid.size(); ++i) {
      const double d = opts.d_grid[i];
      const ExtReal r = rd_function(d, ln, dmin, dav, opts.rd);
      out.finite_n_curve.emplace_back(n, d, r);
      if (r.is_inf()) all_finite[i] = 0;
    }
  }
  if (any_n) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < opts.d_grid.size(); ++i)
      if (all_finite[i]) best = std::min(best, opts.d_grid[i]);
    if (std::isfinite(best)) out.d_min_inf_proxy = best;
  }
  if (mx.name == "mtdna" && my.name == "mtdna" && mx.preset_param && my.preset_param &&
      *mx.preset_param == *my.preset_param)
    out.reference_threshold = mtdna_threshold(*mx.preset_param);
  return out;
}

}  // namespace gwrdt
