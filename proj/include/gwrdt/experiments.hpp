#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gwrdt/distortion.hpp"
#include "gwrdt/ext_real.hpp"
#include "gwrdt/model.hpp"
#include "gwrdt/ratefn.hpp"
#include "gwrdt/trees.hpp"

namespace gwrdt {

struct BallOptions {
  EvalMode mode = EvalMode::Exact;
  std::uint64_t samples = 100000;
  std::uint64_t seed = 1;
  std::size_t budget = kDefaultEnumerationBudget;
  std::uint64_t max_rejects = kDefaultMaxRejects;
};

/// -(1/n) log Q_n(B(x, d)).
struct BallExponent {
  std::size_t n = 0;
  double d = 0.0;
  /// +inf sentinel when Q_n(B) = 0 (exact) or no sample hit the ball (MC).
  ExtReal exponent;
  EvalMode method = EvalMode::Exact;
  /// Q_n(B) or its frequency estimate.
  double probability = 0.0;
  /// Delta-method error of the exponent from the Wilson interval; MC only.
  std::optional<double> standard_error;
  /// MC zero-hit cells: no exponent claim, only this lower bound from the
  /// Wilson upper limit.
  bool censored = false;
  std::optional<double> lower_bound;
  std::string x_digest;
};

BallExponent ball_exponent(const Tree& x, double d, const GWModel& my, const Distortion& rho, BallOptions opts = {});
/// Exact evaluation against a prepared ensemble.
BallExponent ball_exponent(const Tree& x, double d, const CodebookEnsemble& codebook, const Distortion& rho);

/// Canonical encoding of a tree's BFS layout, independent of the alphabet
/// symbols: "t0:c0,t1:c1,...".
std::string tree_digest(const Tree& t);

struct AepOptions {
  std::vector<std::size_t> n_list;
  std::size_t trees_per_n = 20;
  std::uint64_t samples = 100000;
  std::uint64_t seed = 1;
  /// Exact ball probabilities wherever Q_n can be enumerated within budget.
  EvalMode mode = EvalMode::Exact;
  std::size_t budget = kDefaultEnumerationBudget;
  std::uint64_t max_rejects = kDefaultMaxRejects;
  LambdaOrder order = LambdaOrder::SourceInner;
  unsigned threads = 0;
};

struct AepRow {
  std::size_t n = 0;
  ExtReal lambda_star_n;
  std::vector<BallExponent> exponents;
  /// Median over trees of |exponent - Lambda_n^*(d)|.
  ExtReal median_gap;
  ExtReal min_exponent;
  ExtReal max_exponent;
};

struct AepReport {
  double d = 0.0;
  ExtReal r_limit;
  double d_min = 0.0;
  double d_av = 0.0;
  std::uint64_t seed = 0;
  std::vector<AepRow> rows;
  /// Median gap nonincreasing in n.
  bool trend_nonincreasing = false;

  std::string to_csv() const;
  std::string to_json() const;
};

/// Conditioning trees x ~ P_n are drawn with seeds derived from
/// (seed, n, tree index); the report depends only on (seed, options).
AepReport verify_aep(const GWModel& mx, const GWModel& my, const Distortion& rho, double d, const AepOptions& opts);

struct LdpOptions {
  std::vector<std::size_t> n_list;
  std::uint64_t samples = 100000;
  std::uint64_t seed = 1;
  EvalMode mode = EvalMode::Exact;
  std::size_t budget = kDefaultEnumerationBudget;
  std::uint64_t max_rejects = kDefaultMaxRejects;
  /// z points for the infimum of I_rho over the interval.
  int z_points = 9;
  IRhoOptions irho;
  unsigned threads = 0;
};

struct LdpRow {
  std::size_t n = 0;
  std::string x_digest;
  EvalMode method = EvalMode::Exact;
  double probability = 0.0;
  /// -(1/n) log p_n; absent when censored.
  std::optional<double> rate;
  bool censored = false;
  /// Censored MC cells: -(1/n) log of the Wilson upper limit.
  std::optional<double> rate_lower_bound;
};

struct LdpReport {
  double lo = 0.0;
  double hi = 0.0;
  /// inf over z in [lo, hi] of I_rho(z), from the z grid.
  ExtReal i_rho_inf;
  std::vector<std::pair<double, ExtReal>> i_rho_grid;
  std::uint64_t seed = 0;
  std::vector<LdpRow> rows;

  std::string to_csv() const;
  std::string to_json() const;
};

/// Throws PreconditionViolated unless lo < hi.
LdpReport ldp_decay(const GWModel& mx, const GWModel& my, const Distortion& rho, double lo, double hi,
                    const LdpOptions& opts);

struct StationarityOptions {
  std::vector<std::size_t> n_list;
  std::uint64_t samples = 2000;
  std::uint64_t seed = 1;
  std::uint64_t max_rejects = kDefaultMaxRejects;
  PerronOptions perron;
  unsigned threads = 0;
};

struct StationarityRow {
  std::size_t n = 0;
  /// Average type-pair marginal of the joint empirical measure.
  std::vector<double> empirical;
  double tv_right = 0.0;
  double tv_left = 0.0;
};

struct StationarityReport {
  std::vector<double> right_candidate;
  std::vector<double> left_candidate;
  std::uint64_t seed = 0;
  std::vector<StationarityRow> rows;
  /// "right", "left" or "tie" at the largest n.
  std::string favored;

  std::string to_csv() const;
  std::string to_json() const;
};

StationarityReport stationarity_check(const GWModel& mx, const GWModel& my, const StationarityOptions& opts);

/// Total-variation distance between two probability vectors.
double total_variation(const std::vector<double>& p, const std::vector<double>& q);

}  // namespace gwrdt
