#include "gwrdt/experiments.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "gwrdt/error.hpp"
#include "gwrdt/format.hpp"
#include "gwrdt/parallel.hpp"
#include "gwrdt/rng.hpp"

namespace gwrdt {

using nlohmann::json;

namespace {

// Stream tags keep the derived seeds of different experiment roles apart.
enum Stream : std::uint64_t { kBallY = 2, kAepX = 3, kAepBall = 4, kLdpX = 5, kStationary = 6, kLdpY = 7 };

double distortion_slack(double x) { return 1e-9 * std::max(1.0, std::abs(x)); }

struct Wilson {
  double lower;
  double upper;
};

Wilson wilson(std::uint64_t hits, std::uint64_t trials, double z) {
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(hits) / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
  const double half = z / (1.0 + z2 / n) * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

ExtReal exponent_of(double p, std::size_t n) {
  if (p <= 0.0) return ExtReal::infinity();
  if (p >= 1.0) return 0.0;
  return std::max(0.0, -std::log(p) / static_cast<double>(n));
}

json ext_json(const ExtReal& x) {
  if (x.is_inf()) return "inf";
  return x.value();
}

template <class T>
json opt_json(const std::optional<T>& x) {
  return x ? json(*x) : json(nullptr);
}

std::string opt_csv(const std::optional<double>& x) { return x ? format_double(*x) : std::string(); }

const char* mode_name(EvalMode m) { return m == EvalMode::Exact ? "exact" : "mc"; }

ExtReal median(std::vector<ExtReal> v) {
  if (v.empty()) return ExtReal::infinity();
  std::sort(v.begin(), v.end(), [](const ExtReal& a, const ExtReal& b) { return a < b; });
  const std::size_t m = v.size() / 2;
  if (v.size() % 2 == 1) return v[m];
  if (v[m - 1].is_inf() || v[m].is_inf()) return ExtReal::infinity();
  return 0.5 * (v[m - 1].value() + v[m].value());
}

ExtReal abs_gap(const ExtReal& a, const ExtReal& b) {
  if (a.is_inf() && b.is_inf()) return 0.0;
  if (a.is_inf() || b.is_inf()) return ExtReal::infinity();
  return std::abs(a.value() - b.value());
}

std::optional<CodebookEnsemble> try_ensemble(const GWModel& my, std::size_t n, std::size_t budget) {
  try {
    return CodebookEnsemble(my, n, budget);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::CountExceeded) throw;
  }
  return std::nullopt;
}

}  // namespace

std::string tree_digest(const Tree& t) {
  std::string s;
  for (std::size_t v = 0; v < t.size(); ++v) {
    if (v) s += ',';
    s += std::to_string(t.type(v)) + ':' + std::to_string(t.child_count(v));
  }
  return s;
}

BallExponent ball_exponent(const Tree& x, double d, const CodebookEnsemble& codebook, const Distortion& rho) {
  BallExponent out;
  out.n = x.size();
  out.d = d;
  out.method = EvalMode::Exact;
  out.x_digest = tree_digest(x);
  if (d >= rho.bound()) {
    out.probability = 1.0;
    out.exponent = 0.0;
    return out;
  }
  const DistortionProfile profile = codebook.profile(x, rho);
  out.probability = profile.cdf(static_cast<double>(out.n) * d);
  out.exponent = exponent_of(out.probability, out.n);
  return out;
}

BallExponent ball_exponent(const Tree& x, double d, const GWModel& my, const Distortion& rho, BallOptions opts) {
  if (opts.mode == EvalMode::Exact) return ball_exponent(x, d, CodebookEnsemble(my, x.size(), opts.budget), rho);
  if (opts.samples == 0) fail(ErrorCode::InvalidParameter, "Monte Carlo mode needs at least one sample");
  BallExponent out;
  out.n = x.size();
  out.d = d;
  out.method = EvalMode::MonteCarlo;
  out.x_digest = tree_digest(x);
  ConditionedSampler sampler(my, out.n, opts.max_rejects);
  Rng rng(derive_seed(opts.seed, {out.n, kBallY}));
  std::uint64_t hits = 0;
  for (std::uint64_t j = 0; j < opts.samples; ++j) {
    const Tree y = sampler.draw(rng);
    if (tree_distortion(rho, x, y) <= d + distortion_slack(d)) ++hits;
  }
  const auto n = static_cast<double>(out.n);
  out.probability = static_cast<double>(hits) / static_cast<double>(opts.samples);
  if (hits == 0) {
    out.censored = true;
    out.exponent = ExtReal::infinity();
    out.lower_bound = -std::log(wilson(0, opts.samples, 1.96).upper) / n;
    return out;
  }
  out.exponent = exponent_of(out.probability, out.n);
  const Wilson w = wilson(hits, opts.samples, 1.0);
  out.standard_error = 0.5 * (w.upper - w.lower) / (n * out.probability);
  return out;
}

// ---------------------------------------------------------------------------

AepReport verify_aep(const GWModel& mx, const GWModel& my, const Distortion& rho, double d, const AepOptions& opts) {
  if (opts.n_list.empty()) fail(ErrorCode::InvalidParameter, "n_list is empty");
  if (opts.trees_per_n == 0) fail(ErrorCode::InvalidParameter, "trees_per_n must be positive");
  AepReport report;
  report.d = d;
  report.seed = opts.seed;
  const PerronData pi = stationary_pair(mx, my);
  const LambdaInf lam(pi, mx.kernel, my.kernel, rho, opts.order);
  report.d_av = lam.mean();
  report.d_min = lam.slope_at_minus_infinity();
  report.r_limit = rd_function(d, lam, report.d_min, report.d_av);

  for (std::size_t n : opts.n_list) {
    AepRow row;
    row.n = n;
    const ConditionedSampler proto_x(mx, n, opts.max_rejects);
    std::optional<CodebookEnsemble> ens;
    if (opts.mode == EvalMode::Exact) ens = try_ensemble(my, n, opts.budget);

    std::optional<LambdaN> ln;
    if (opts.mode == EvalMode::Exact) {
      try {
        LambdaNOptions lo;
        lo.budget = opts.budget;
        lo.threads = opts.threads;
        ln.emplace(mx, my, n, rho, lo);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::CountExceeded) throw;
      }
    }
    if (!ln) {
      LambdaNOptions lo;
      lo.mode = EvalMode::MonteCarlo;
      lo.samples = std::min<std::uint64_t>(opts.samples, 2000);
      lo.seed = opts.seed;
      lo.budget = opts.budget;
      lo.max_rejects = opts.max_rejects;
      lo.threads = opts.threads;
      ln.emplace(mx, my, n, rho, lo);
    }
    row.lambda_star_n = rd_function(d, *ln, ln->slope_at_minus_infinity(), ln->mean());

    row.exponents.resize(opts.trees_per_n);
    parallel_for(opts.trees_per_n, opts.threads, [&](std::size_t i) {
      ConditionedSampler sampler = proto_x;
      Rng rng(derive_seed(opts.seed, {n, i, kAepX}));
      const Tree x = sampler.draw(rng);
      if (ens) {
        row.exponents[i] = ball_exponent(x, d, *ens, rho);
      } else {
        BallOptions bo;
        bo.mode = EvalMode::MonteCarlo;
        bo.samples = opts.samples;
        bo.seed = derive_seed(opts.seed, {n, i, kAepBall});
        bo.max_rejects = opts.max_rejects;
        row.exponents[i] = ball_exponent(x, d, my, rho, bo);
      }
    });

    std::vector<ExtReal> gaps;
    row.min_exponent = ExtReal::infinity();
    row.max_exponent = 0.0;
    for (const auto& e : row.exponents) {
      gaps.push_back(abs_gap(e.exponent, row.lambda_star_n));
      if (e.exponent < row.min_exponent) row.min_exponent = e.exponent;
      if (e.exponent > row.max_exponent) row.max_exponent = e.exponent;
    }
    row.median_gap = median(std::move(gaps));
    report.rows.push_back(std::move(row));
  }

  report.trend_nonincreasing = true;
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    const ExtReal& prev = report.rows[i - 1].median_gap;
    const ExtReal& cur = report.rows[i].median_gap;
    if (cur.is_inf() && prev.is_inf()) continue;
    if (cur.is_inf() || (prev.is_finite() && cur.value() > prev.value() + 1e-12)) report.trend_nonincreasing = false;
  }
  return report;
}

std::string AepReport::to_csv() const {
  std::string s = "n,tree,x_digest,method,probability,exponent,stderr,censored,lower_bound,lambda_star_n,gap\n";
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.exponents.size(); ++i) {
      const auto& e = row.exponents[i];
      s += std::to_string(row.n) + ',' + std::to_string(i) + ",\"" + e.x_digest + "\"," + mode_name(e.method) + ',' +
           format_double(e.probability) + ',' + e.exponent.to_string() + ',' + opt_csv(e.standard_error) + ',' +
           (e.censored ? "1" : "0") + ',' + opt_csv(e.lower_bound) + ',' + row.lambda_star_n.to_string() + ',' +
           abs_gap(e.exponent, row.lambda_star_n).to_string() + '\n';
    }
  return s;
}

std::string AepReport::to_json() const {
  json j;
  j["d"] = d;
  j["r_limit"] = ext_json(r_limit);
  j["d_min"] = d_min;
  j["d_av"] = d_av;
  j["seed"] = seed;
  j["trend_nonincreasing"] = trend_nonincreasing;
  json rs = json::array();
  for (const auto& row : rows) {
    rs.push_back({{"n", row.n},
                  {"lambda_star_n", ext_json(row.lambda_star_n)},
                  {"median_gap", ext_json(row.median_gap)},
                  {"min_exponent", ext_json(row.min_exponent)},
                  {"max_exponent", ext_json(row.max_exponent)},
                  {"trees", row.exponents.size()}});
  }
  j["rows"] = rs;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

LdpReport ldp_decay(const GWModel& mx, const GWModel& my, const Distortion& rho, double lo, double hi,
                    const LdpOptions& opts) {
  if (!(lo < hi)) fail(ErrorCode::PreconditionViolated, "interval needs lo < hi, got (" + format_double(lo) + ", " +
                                                            format_double(hi) + ")");
  if (opts.z_points < 2) fail(ErrorCode::InvalidParameter, "z_points must be at least 2");
  LdpReport report;
  report.lo = lo;
  report.hi = hi;
  report.seed = opts.seed;

  const IRhoSolver solver(mx, my, rho, opts.irho);
  std::vector<double> zs;
  for (int k = 0; k < opts.z_points; ++k)
    zs.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(opts.z_points - 1));
  report.i_rho_grid.resize(zs.size());
  parallel_for(zs.size(), opts.threads, [&](std::size_t k) {
    report.i_rho_grid[k] = {zs[k], solver.solve(zs[k]).rate.value};
  });
  report.i_rho_inf = ExtReal::infinity();
  for (const auto& [z, v] : report.i_rho_grid)
    if (v < report.i_rho_inf) report.i_rho_inf = v;

  report.rows.resize(opts.n_list.size());
  for (std::size_t r = 0; r < opts.n_list.size(); ++r) {
    const std::size_t n = opts.n_list[r];
    LdpRow& row = report.rows[r];
    row.n = n;
    ConditionedSampler sx(mx, n, opts.max_rejects);
    Rng rng(derive_seed(opts.seed, {n, 0, kLdpX}));
    const Tree x = sx.draw(rng);
    row.x_digest = tree_digest(x);
    const double nd = static_cast<double>(n);
    std::optional<CodebookEnsemble> ens;
    if (opts.mode == EvalMode::Exact) ens = try_ensemble(my, n, opts.budget);
    if (ens) {
      row.method = EvalMode::Exact;
      row.probability = ens->profile(x, rho).open_interval(nd * lo, nd * hi);
      if (row.probability > 0.0)
        row.rate = std::max(0.0, -std::log(row.probability) / nd);
      else
        row.censored = true;
      continue;
    }
    if (opts.samples == 0) fail(ErrorCode::InvalidParameter, "Monte Carlo mode needs at least one sample");
    row.method = EvalMode::MonteCarlo;
    ConditionedSampler sy(my, n, opts.max_rejects);
    Rng yrng(derive_seed(opts.seed, {n, 0, kLdpY}));
    std::uint64_t hits = 0;
    for (std::uint64_t j = 0; j < opts.samples; ++j) {
      const double dist = tree_distortion(rho, x, sy.draw(yrng));
      if (dist > lo + distortion_slack(lo) && dist < hi - distortion_slack(hi)) ++hits;
    }
    row.probability = static_cast<double>(hits) / static_cast<double>(opts.samples);
    if (hits == 0) {
      row.censored = true;
      row.rate_lower_bound = -std::log(wilson(0, opts.samples, 1.96).upper) / nd;
    } else {
      row.rate = std::max(0.0, -std::log(row.probability) / nd);
    }
  }
  return report;
}

std::string LdpReport::to_csv() const {
  std::string s = "n,x_digest,method,probability,rate,censored,rate_lower_bound,i_rho_inf\n";
  for (const auto& row : rows)
    s += std::to_string(row.n) + ",\"" + row.x_digest + "\"," + mode_name(row.method) + ',' +
         format_double(row.probability) + ',' + opt_csv(row.rate) + ',' + (row.censored ? "1" : "0") + ',' +
         opt_csv(row.rate_lower_bound) + ',' + i_rho_inf.to_string() + '\n';
  return s;
}

std::string LdpReport::to_json() const {
  json j;
  j["interval"] = {lo, hi};
  j["i_rho_inf"] = ext_json(i_rho_inf);
  json grid = json::array();
  for (const auto& [z, v] : i_rho_grid) grid.push_back({{"z", z}, {"i_rho", ext_json(v)}});
  j["i_rho_grid"] = grid;
  j["seed"] = seed;
  json rs = json::array();
  for (const auto& row : rows)
    rs.push_back({{"n", row.n},
                  {"method", mode_name(row.method)},
                  {"probability", row.probability},
                  {"rate", opt_json(row.rate)},
                  {"censored", row.censored},
                  {"rate_lower_bound", opt_json(row.rate_lower_bound)}});
  j["rows"] = rs;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) fail(ErrorCode::SizeMismatch, "distributions have different lengths");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return std::min(1.0, 0.5 * s);
}

StationarityReport stationarity_check(const GWModel& mx, const GWModel& my, const StationarityOptions& opts) {
  if (opts.samples == 0) fail(ErrorCode::InvalidParameter, "samples must be positive");
  StationarityReport report;
  report.seed = opts.seed;
  const PerronData right = stationary_pair(mx, my, opts.perron);
  const PerronData left = stationary_pair_left(mx, my, opts.perron);
  report.right_candidate.assign(right.pi.data(), right.pi.data() + right.pi.size());
  report.left_candidate.assign(left.pi.data(), left.pi.data() + left.pi.size());
  const std::size_t k = mx.types();

  for (std::size_t n : opts.n_list) {
    const ConditionedSampler px(mx, n, opts.max_rejects);
    const ConditionedSampler py(my, n, opts.max_rejects);
    std::vector<std::vector<double>> per(opts.samples);
    parallel_for(opts.samples, opts.threads, [&](std::size_t i) {
      ConditionedSampler sx = px;
      ConditionedSampler sy = py;
      Rng rng(derive_seed(opts.seed, {n, i, kStationary}));
      const Tree tx = sx.draw(rng);
      const Tree ty = sy.draw(rng);
      per[i] = type_pair_marginal(joint_measure(tx, ty), k);
    });
    StationarityRow row;
    row.n = n;
    row.empirical.assign(k * k, 0.0);
    for (const auto& v : per)
      for (std::size_t a = 0; a < v.size(); ++a) row.empirical[a] += v[a];
    for (double& x : row.empirical) x /= static_cast<double>(opts.samples);
    row.tv_right = total_variation(row.empirical, report.right_candidate);
    row.tv_left = total_variation(row.empirical, report.left_candidate);
    report.rows.push_back(std::move(row));
  }
  report.favored = "tie";
  if (!report.rows.empty()) {
    const auto& last = report.rows.back();
    if (last.tv_right < last.tv_left - 1e-12)
      report.favored = "right";
    else if (last.tv_left < last.tv_right - 1e-12)
      report.favored = "left";
  }
  return report;
}

std::string StationarityReport::to_csv() const {
  std::string s = "n,pair,empirical,right_candidate,left_candidate,tv_right,tv_left\n";
  for (const auto& row : rows)
    for (std::size_t a = 0; a < row.empirical.size(); ++a)
      s += std::to_string(row.n) + ',' + std::to_string(a) + ',' + format_double(row.empirical[a]) + ',' +
           format_double(right_candidate[a]) + ',' + format_double(left_candidate[a]) + ',' +
           format_double(row.tv_right) + ',' + format_double(row.tv_left) + '\n';
  return s;
}

std::string StationarityReport::to_json() const {
  json j;
  j["right_candidate"] = right_candidate;
  j["left_candidate"] = left_candidate;
  j["seed"] = seed;
  j["favored"] = favored;
  json rs = json::array();
  for (const auto& row : rows)
    rs.push_back({{"n", row.n}, {"empirical", row.empirical}, {"tv_right", row.tv_right}, {"tv_left", row.tv_left}});
  j["rows"] = rs;
  return j.dump(2) + "\n";
}

}  // namespace gwrdt
