#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "gwrdt/distortion.hpp"
#include "gwrdt/empirical.hpp"
#include "gwrdt/ext_real.hpp"
#include "gwrdt/model.hpp"
#include "gwrdt/spectral.hpp"
#include "gwrdt/trees.hpp"

namespace gwrdt {

// ---------------------------------------------------------------------------
// Relative entropy and the process-level rate functions

/// H(nu || mu) in nats with 0 log(0/q) = 0; +inf when nu puts mass where mu
/// does not. Throws SizeMismatch on length mismatch.
ExtReal rel_entropy(std::span<const double> nu, std::span<const double> mu);
ExtReal rel_entropy(const MarkMeasure& nu, const MarkMeasure& mu);

struct RateValue {
  ExtReal value;
  std::optional<PairMeasure> argmin;
  ShiftDefect defect;
};

/// H(nu || nu_{1,1} (x) Kx  x  nu_{2,1} (x) Ky) if shift_defect(nu) <= tol,
/// else the +inf sentinel.
RateValue rate_I1(const PairMeasure& nu, const KernelTable& kx, const KernelTable& ky, double tol);

/// H(omega || omega_1 (x) Kx x Ky) with omega_1 the joint type-pair marginal,
/// gated on the shift defect of reindex(omega).
RateValue rate_I2(const PairMeasure& omega, const KernelTable& kx, const KernelTable& ky, double tol);

/// Marks (a, c) with K{c|a} > 0, sorted, with their kernel weights.
struct MarkSpace {
  std::vector<VertexMark> marks;
  std::vector<double> kernel_prob;
  std::size_t types = 0;

  explicit MarkSpace(const KernelTable& kernel);
  std::size_t size() const { return marks.size(); }
};

/// pi_type (x) K as a probability vector over the mark space.
std::vector<double> mark_law(const MarkSpace& space, std::span<const double> type_law);

// ---------------------------------------------------------------------------
// I_rho: constrained minimization of I_1

struct IRhoOptions {
  /// Penalty-continuation stages of entropic mirror descent.
  int stages = 6;
  double penalty_start = 10.0;
  double penalty_growth = 10.0;
  int iters_per_stage = 400;
  /// Alternating exact I-projections after the penalty stages.
  int polish_iters = 2000;
  double polish_tol = 1e-14;
  /// Maximum constraint residual accepted for a finite value.
  double feasibility_tol = 1e-9;
};

struct IRhoResult {
  RateValue rate;
  double constraint_residual = 0.0;
  /// Range of <rho, nu> over shift-invariant nu on the mark-pair universe.
  double z_min = 0.0;
  double z_max = 0.0;
  int polish_iterations = 0;
};

/// Reusable setup for evaluating I_rho(z) at many z: builds the mark-pair
/// universe, the linear constraints and the feasible z range once.
class IRhoSolver {
 public:
  IRhoSolver(const GWModel& mx, const GWModel& my, const Distortion& rho, IRhoOptions opts = {});

  /// +inf sentinel outside [z_min, z_max]. Throws OptFailed (with the best
  /// objective in the message) when the polished iterate stays infeasible.
  IRhoResult solve(double z) const;

  double z_min() const { return z_min_; }
  double z_max() const { return z_max_; }
  std::size_t universe_size() const { return rho_.size(); }

 private:
  // Universe index u = i * |sy| + j for mark i of x and mark j of y.
  MarkSpace sx_;
  MarkSpace sy_;
  KernelTable kx_;
  KernelTable ky_;
  IRhoOptions opts_;
  std::vector<double> rho_;
  std::vector<double> log_kernel_;
  std::vector<std::vector<double>> shift_rows_;
  bool feasible_ = false;
  double z_min_ = 0.0;
  double z_max_ = 0.0;
};

IRhoResult i_rho(double z, const GWModel& mx, const GWModel& my, const Distortion& rho, IRhoOptions opts = {});

// ---------------------------------------------------------------------------
// Log-moment generating functions and their Legendre transform

/// A convex function of t with analytic derivative.
class ConvexFunction {
 public:
  virtual ~ConvexFunction() = default;
  virtual double value(double t) const = 0;
  virtual double derivative(double t) const = 0;
  /// lim_{t -> -inf} value(t) / t.
  virtual double slope_at_minus_infinity() const = 0;
};

/// Which marks sit inside the logarithm of the limiting log-MGF.
enum class LambdaOrder {
  /// <log <e^{t rho}, pi1 (x) Kx>, pi2 (x) Ky>: inner over source marks.
  SourceInner,
  /// <log <e^{t rho}, pi2 (x) Ky>, pi1 (x) Kx>: inner over codebook marks,
  /// matching the finite-n definition.
  CodebookInner,
};

class LambdaInf final : public ConvexFunction {
 public:
  LambdaInf(const PerronData& pi, const KernelTable& kx, const KernelTable& ky, const Distortion& rho,
            LambdaOrder order = LambdaOrder::SourceInner);

  double value(double t) const override;
  double derivative(double t) const override;
  double slope_at_minus_infinity() const override;
  /// derivative(0): the mean distortion under independent marks.
  double mean() const;

 private:
  // Outer weights, inner weights, rho[outer][inner].
  std::vector<double> outer_;
  std::vector<double> inner_;
  std::vector<std::vector<double>> rho_;
};

double lambda_inf(double t, const PerronData& pi, const KernelTable& kx, const KernelTable& ky,
                  const Distortion& rho, LambdaOrder order = LambdaOrder::SourceInner);

/// E[rho(A_X, A_Y)] for independent A_X ~ pi1 (x) Kx, A_Y ~ pi2 (x) Ky.
double d_average(const PerronData& pi, const KernelTable& kx, const KernelTable& ky, const Distortion& rho);

/// Law of D = sum_v rho(mark_x(v), mark_y(v)) under Y ~ Q_n for one fixed x.
/// Totals ascending and distinct; weights sum to 1.
struct DistortionProfile {
  std::vector<double> totals;
  std::vector<double> weights;

  double log_mgf(double t) const;
  double log_mgf_derivative(double t) const;
  /// Q_n(D <= limit).
  double cdf(double limit) const;
  /// Q_n(lo < D < hi).
  double open_interval(double lo, double hi) const;
  double min_total() const { return totals.front(); }
  double mean() const;
};

/// Exact conditioned law Q_n from enumeration, prepared for fast distortion
/// profiles against arbitrary x.
class CodebookEnsemble {
 public:
  CodebookEnsemble(const GWModel& my, std::size_t n, std::size_t budget = kDefaultEnumerationBudget);
  /// Ensemble over explicit size-n trees; weights are normalized.
  CodebookEnsemble(std::size_t n, const std::vector<WeightedTree>& items);

  std::size_t n() const { return n_; }
  std::size_t size() const { return weights_.size(); }
  /// Throws SizeMismatch when x.size() != n.
  DistortionProfile profile(const Tree& x, const Distortion& rho) const;

 private:
  std::size_t n_;
  std::vector<VertexMark> marks_;
  // Flattened mark ids, n per tree.
  std::vector<std::uint32_t> ids_;
  std::vector<double> weights_;
};

enum class EvalMode { Exact, MonteCarlo };

struct LambdaNOptions {
  EvalMode mode = EvalMode::Exact;
  std::uint64_t samples = 1000;
  std::uint64_t seed = 1;
  std::size_t budget = kDefaultEnumerationBudget;
  std::uint64_t max_rejects = kDefaultMaxRejects;
  unsigned threads = 0;
};

/// Lambda_n(t) = (1/n) E_{P_n}[log E_{Q_n} e^{n t rho^(n)(X,Y)}] as a convex
/// function of t. Exact mode enumerates P_n and Q_n; Monte Carlo mode
/// samples X ~ P_n and uses the exact inner sum when Q_n can be enumerated,
/// a sampled inner sum otherwise.
class LambdaN final : public ConvexFunction {
 public:
  LambdaN(const GWModel& mx, const GWModel& my, std::size_t n, const Distortion& rho, LambdaNOptions opts = {});

  double value(double t) const override;
  double derivative(double t) const override;
  double slope_at_minus_infinity() const override;
  /// Monte Carlo standard error of value(t); 0 in exact mode.
  double standard_error(double t) const;
  double mean() const { return derivative(0.0); }
  std::size_t n() const { return n_; }
  EvalMode mode() const { return mode_; }

 private:
  std::size_t n_;
  EvalMode mode_;
  std::vector<DistortionProfile> profiles_;
  std::vector<double> weights_;
};

struct LambdaNValue {
  double value;
  double standard_error;
};

LambdaNValue lambda_n(double t, const GWModel& mx, const GWModel& my, std::size_t n, const Distortion& rho,
                      LambdaNOptions opts = {});

/// E_{P_n}[ess inf_{Y ~ Q_n} rho^(n)(X, Y)].
double d_min_n(const GWModel& mx, const GWModel& my, std::size_t n, const Distortion& rho, LambdaNOptions opts = {});

struct RdOptions {
  /// Absolute tolerance on the maximizing t.
  double tol = 1e-12;
  int max_bracket_doublings = 80;
};

/// sup_{t <= 0} [t d - lambda(t)]: +inf sentinel for d < d_min, 0 for
/// d >= d_av, otherwise golden-section search on a bracket refined by
/// bisection on the derivative. Throws OptFailed when no bracket is found.
ExtReal rd_function(double d, const ConvexFunction& lambda, double d_min, double d_av, RdOptions opts = {});

/// (3/4)(1-alpha) + (1/4) alpha (1-alpha)^3.
double mtdna_threshold(double alpha);

struct RDSummary {
  double d_min = 0.0;
  double d_av = 0.0;
  std::vector<std::pair<double, ExtReal>> curve;
  std::vector<std::pair<double, double>> lambda_samples;
  /// (n, d_min^(n)) for the exact finite-n sizes that were evaluated.
  std::vector<std::pair<std::size_t, double>> d_min_n;
  /// (n, d, Lambda_n^*(d)) on the same grid.
  std::vector<std::tuple<std::size_t, double, ExtReal>> finite_n_curve;
  /// Smallest grid d with every evaluated Lambda_n^*(d) finite.
  std::optional<double> d_min_inf_proxy;
  /// Closed-form comparison threshold for mtDNA preset pairs.
  std::optional<double> reference_threshold;
  LambdaOrder order = LambdaOrder::SourceInner;

  std::string curve_csv() const;
  std::string lambda_csv() const;
};

struct RdSummaryOptions {
  std::vector<double> d_grid;
  std::vector<double> t_grid;
  /// Sizes for the finite-n d_min trend; sizes with P(|T| = n) = 0 are skipped.
  std::vector<std::size_t> n_list;
  LambdaOrder order = LambdaOrder::SourceInner;
  PerronOptions perron;
  RdOptions rd;
  std::size_t budget = kDefaultEnumerationBudget;
};

RDSummary rd_summary(const GWModel& mx, const GWModel& my, const Distortion& rho, const RdSummaryOptions& opts);

}  // namespace gwrdt
