// Acceptance suite: one PASS/FAIL line per criterion, with timings.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "gwrdt/distortion.hpp"
#include "gwrdt/empirical.hpp"
#include "gwrdt/error.hpp"
#include "gwrdt/experiments.hpp"
#include "gwrdt/model.hpp"
#include "gwrdt/ratefn.hpp"
#include "gwrdt/rng.hpp"
#include "gwrdt/spectral.hpp"
#include "gwrdt/trees.hpp"

using namespace gwrdt;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(double x) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

double binary_kl_half(double d) {
  auto term = [](double p) { return p > 0.0 ? p * std::log(2.0 * p) : 0.0; };
  return term(d) + term(1.0 - d);
}

Outcome criterion1() {
  Outcome o;
  for (double a : {0.1, 0.5, 0.9}) {
    const GWModel m = mtdna_model(a);
    const Eigen::MatrixXd d = pair_matrix(m, m).displayed();
    const double b = 1.0 - a;
    Eigen::Matrix4d expect;
    expect << 1, 0, 0, 0, a, b, 0, 0, a, 0, b, 0, a * a, a * b, a * b, b * b;
    const double err = (d - expect).cwiseAbs().maxCoeff();
    o.require(err <= 1e-12, "alpha " + fmt(a) + ": matrix error " + fmt(err));
    const PerronData pd = stationary_pair(m, m);
    o.require(std::abs(pd.eigenvalue - 1.0) <= 1e-10, "alpha " + fmt(a) + ": eigenvalue " + fmt(pd.eigenvalue));
    const double pi_err = (pd.pi.array() - 0.25).abs().maxCoeff();
    o.require(pi_err <= 1e-10, "alpha " + fmt(a) + ": pi error " + fmt(pi_err));
  }
  if (o.pass) o.detail = "displayed matrix, lambda = 1 and uniform pi for alpha in {0.1, 0.5, 0.9}";
  return o;
}

Outcome criterion2() {
  Outcome o;
  double worst = 0.0;
  for (double a : {0.1, 0.5, 0.9}) {
    const Eigen::MatrixXd mm = mean_matrix(mtdna_model(a));
    const double rho = Eigen::EigenSolver<Eigen::MatrixXd>(mm).eigenvalues().cwiseAbs().maxCoeff();
    const auto report = validate_model(mtdna_model(a));
    worst = std::max({worst, std::abs(rho - 1.0), std::abs(report.perron_eigenvalue - 1.0)});
    o.require(report.critical, "alpha " + fmt(a) + " not reported critical");
  }
  o.require(worst <= 1e-9, "spectral radius error " + fmt(worst));
  if (o.pass) o.detail = "max |rho - 1| = " + fmt(worst);
  return o;
}

Outcome criterion3() {
  Outcome o;
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double min_h = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 1000; ++i) {
    const int k = 2 + i % 7;
    std::vector<double> p(k), q(k);
    double sp = 0.0, sq = 0.0;
    for (int j = 0; j < k; ++j) {
      p[j] = u(gen) * (u(gen) < 0.2 ? 0.0 : 1.0);
      q[j] = u(gen) + 1e-9;
      sp += p[j];
      sq += q[j];
    }
    if (sp == 0.0) {
      p[0] = 1.0;
      sp = 1.0;
    }
    for (int j = 0; j < k; ++j) {
      p[j] /= sp;
      q[j] /= sq;
    }
    min_h = std::min(min_h, rel_entropy(p, q).value());
  }
  o.require(min_h >= 0.0, "negative relative entropy " + fmt(min_h));

  const GWModel m = mtdna_model(0.5);
  const PerronData pi = stationary_pair(m, m);
  for (const Distortion& rho : {Distortion::type_hamming(), Distortion::mark_hamming(2)}) {
    const std::string tag = rho.name() + ": ";
    const LambdaInf lam(pi, m.kernel, m.kernel, rho);
    o.require(lam.value(0.0) == 0.0, tag + "Lambda(0) = " + fmt(lam.value(0.0)));
    for (double t = -10.0; t <= 5.0; t += 0.25) {
      const double mid = lam.value(t);
      const double chord = 0.5 * (lam.value(t - 0.25) + lam.value(t + 0.25));
      if (mid > chord + 1e-12) o.require(false, tag + "convexity fails at t = " + fmt(t));
    }
    const double dav = d_average(pi, m.kernel, m.kernel, rho);
    o.require(std::abs(lam.derivative(0.0) - dav) <= 1e-8, tag + "Lambda'(0) != d_av");
    const double dmin = lam.slope_at_minus_infinity();
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 40; ++k) {
      const double d = dmin + (dav - dmin) * k / 40.0;
      const double r = rd_function(d, lam, dmin, dav).value();
      if (r > prev + 1e-12) o.require(false, tag + "R increases at d = " + fmt(d));
      prev = r;
    }
    o.require(std::abs(rd_function(dav, lam, dmin, dav).value()) <= 1e-8, tag + "R(d_av) != 0");
    o.require(rd_function(dmin - 1e-3, lam, dmin, dav).is_inf(), tag + "R below d_min is finite");
  }
  if (o.pass) o.detail = "min H = " + fmt(min_h) + " over 1000 pairs; Legendre properties hold for type and mark Hamming";
  return o;
}

Outcome criterion4() {
  Outcome o;
  const GWModel m = mtdna_model(0.5);
  const LambdaInf lam(stationary_pair(m, m), m.kernel, m.kernel, Distortion::type_hamming());
  const double l1 = lam.value(1.0);
  const double l1_err = std::abs(l1 - std::log((1.0 + std::exp(1.0)) / 2.0));
  const double r = rd_function(0.25, lam, 0.0, 0.5).value();
  const double r0 = rd_function(1e-6, lam, 0.0, 0.5).value();
  o.require(l1_err <= 1e-10, "Lambda(1) error " + fmt(l1_err));
  o.require(std::abs(r - 0.130812) <= 1e-6, "R(0.25) = " + fmt(r));
  o.require(std::abs(r - binary_kl_half(0.25)) <= 1e-9, "R(0.25) differs from the binary relative entropy");
  o.require(std::abs(r0 - std::log(2.0)) <= 1e-3, "R(1e-6) = " + fmt(r0));
  if (o.pass) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "Lambda(1) = %.12f, R(0.25) = %.9f, R(1e-6) = %.6f", l1, r, r0);
    o.detail = buf;
  }
  return o;
}

Outcome criterion5() {
  Outcome o;
  const GWModel m = mtdna_model(0.5);
  std::string tvs;
  for (std::size_t n : {3u, 5u, 7u}) {
    const auto list = enumerate_trees(m, n);
    std::map<Tree, double> expect;
    for (const auto& w : list.items) expect[w.tree] = w.prob / list.total;
    ConditionedSampler sampler(m, n);
    Rng rng(derive_seed(5, {n}));
    const int draws = 100000;
    std::map<Tree, double> freq;
    for (int i = 0; i < draws; ++i) freq[sampler.draw(rng)] += 1.0 / draws;
    double tv = 0.0;
    for (const auto& [t, p] : expect) {
      const auto it = freq.find(t);
      tv += std::abs(p - (it == freq.end() ? 0.0 : it->second));
    }
    for (const auto& [t, p] : freq)
      if (!expect.count(t)) tv += p;
    tv *= 0.5;
    o.require(tv <= 0.02, "TV at n = " + std::to_string(n) + " is " + fmt(tv));
    tvs += (tvs.empty() ? "" : ", ") + fmt(tv);
  }

  const Distortion rho = Distortion::type_hamming();
  BallOptions mc;
  mc.mode = EvalMode::MonteCarlo;
  mc.samples = 100000;
  double worst = 0.0;
  int compared = 0;
  for (std::size_t n : {3u, 5u, 7u}) {
    for (std::uint64_t k = 0; k < 5; ++k) {
      const Tree x = sample_conditioned(m, n, derive_seed(55, {n, k}));
      mc.seed = derive_seed(56, {n, k});
      for (double d : {0.2, 0.4}) {
        const BallExponent exact = ball_exponent(x, d, m, rho);
        const BallExponent approx = ball_exponent(x, d, m, rho, mc);
        if (approx.censored || !approx.standard_error) {
          o.require(false, "censored Monte Carlo cell at n = " + std::to_string(n));
          continue;
        }
        const double z = std::abs(approx.exponent.value() - exact.exponent.value()) / *approx.standard_error;
        worst = std::max(worst, z);
        ++compared;
      }
    }
  }
  o.require(worst <= 3.0, "exact vs Monte Carlo exponent differs by " + fmt(worst) + " stderr");
  if (o.pass)
    o.detail = "TV = " + tvs + "; " + std::to_string(compared) + " ball exponents within " + fmt(worst) + " stderr";
  return o;
}

// Minimum of I_1 under the shift constraints and <rho, nu> = z for x
// alternating, y chain-toy(1/2), type Hamming, over a grid of step h.
// Shift invariance forces nu(A, .) = nu(B, .) = 1/2 and nu(., 0|1) =
// nu(., 1|0); p1 = nu(0|1, 0|0) and p2 = nu(0|1, 0|1) remain free.
double toy_grid_min(double z, double h) {
  double best = std::numeric_limits<double>::infinity();
  const int steps = static_cast<int>(std::lround(0.5 / h));
  auto term = [](double v, double b) { return v > 0.0 ? v * std::log(v / b) : 0.0; };
  for (int i = 0; i <= steps; ++i) {
    for (int j = 0; i + j <= steps; ++j) {
      const double p1 = i * h, p2 = j * h;
      const double s = z - 0.5 + p1 + p2;
      const double t = 1.0 - p1 - 2.0 * p2;
      double r2 = t - s, r1 = 2.0 * s - t, pc = 0.5 - p1 - p2, rc = 0.5 - s;
      if (r1 < -1e-12 || r2 < -1e-12 || rc < -1e-12 || pc < -1e-12) continue;
      r1 = std::max(r1, 0.0);
      r2 = std::max(r2, 0.0);
      rc = std::max(rc, 0.0);
      pc = std::max(pc, 0.0);
      const double q0 = p1 + p2 + r1 + r2;
      const double by[3] = {0.5 * q0, 0.5 * q0, pc + rc};
      const double nu[2][3] = {{p1, p2, pc}, {r1, r2, rc}};
      double v = 0.0;
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 3; ++y) v += term(nu[x][y], 0.5 * by[y]);
      best = std::min(best, v);
    }
  }
  return best;
}

Outcome criterion6() {
  Outcome o;
  const IRhoSolver toy(alternating_model(), chain_toy_model(0.5), Distortion::type_hamming());
  double worst = 0.0;
  std::vector<double> values;
  for (int k = 0; k <= 8; ++k) {
    const double z = toy.z_min() + (toy.z_max() - toy.z_min()) * k / 8.0;
    const IRhoResult r = toy.solve(z);
    if (!r.rate.value.is_finite()) {
      o.require(false, "toy i_rho infinite at z = " + fmt(z));
      continue;
    }
    worst = std::max(worst, std::abs(r.rate.value.value() - toy_grid_min(z, 1e-3)));
    values.push_back(r.rate.value.value());
  }
  o.require(worst <= 2e-3, "toy grid mismatch " + fmt(worst));

  const GWModel u = uniform_binary_model();
  const Distortion rho = Distortion::type_hamming();
  const double dav = d_average(stationary_pair(u, u), u.kernel, u.kernel, rho);
  const IRhoSolver ub(u, u, rho);
  const double at_dav = ub.solve(dav).rate.value.value();
  o.require(std::abs(at_dav) <= 1e-6, "uniform-binary i_rho(d_av) = " + fmt(at_dav));

  double worst_mid = 0.0;
  auto midpoint = [&](const std::vector<double>& v) {
    for (std::size_t i = 1; i + 1 < v.size(); ++i)
      worst_mid = std::max(worst_mid, v[i] - 0.5 * (v[i - 1] + v[i + 1]));
  };
  midpoint(values);
  std::vector<double> ub_values;
  for (int k = 0; k <= 8; ++k) ub_values.push_back(ub.solve(0.1 + 0.1 * k).rate.value.value());
  midpoint(ub_values);
  o.require(worst_mid <= 1e-4, "midpoint convexity violated by " + fmt(worst_mid));
  if (o.pass)
    o.detail = "toy max |solver - grid| = " + fmt(worst) + "; i_rho(d_av) = " + fmt(at_dav) +
               "; worst midpoint excess " + fmt(worst_mid);
  return o;
}

Outcome criterion7(const std::filesystem::path& out_dir) {
  Outcome o;
  const GWModel m = mtdna_model(0.5);
  AepOptions opts;
  opts.n_list = {3, 5, 7, 9};
  opts.trees_per_n = 20;
  opts.seed = 1;
  opts.mode = EvalMode::Exact;
  const AepReport r = verify_aep(m, m, Distortion::type_hamming(), 0.25, opts);
  std::filesystem::create_directories(out_dir);
  std::ofstream(out_dir / "aep_trend.csv") << r.to_csv();
  std::ofstream(out_dir / "aep_trend.json") << r.to_json();
  std::string gaps;
  for (const auto& row : r.rows) {
    gaps += (gaps.empty() ? "" : ", ") + std::to_string(row.n) + ": " + row.median_gap.to_string();
    for (const auto& e : row.exponents)
      if (e.method != EvalMode::Exact) o.require(false, "non-exact exponent at n = " + std::to_string(row.n));
  }
  o.require(r.trend_nonincreasing, "median gap not nonincreasing");
  o.detail = (o.detail.empty() ? "" : o.detail + "; ") + "median gaps {" + gaps + "}; raw values in " +
             (out_dir / "aep_trend.csv").string();
  return o;
}

Outcome criterion8() {
  Outcome o;
  const GWModel m = mtdna_model(0.5);
  const Distortion rho = Distortion::mark_hamming(2);
  double worst_defect = 0.0, worst_view = 0.0;
  bool involution = true;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const std::size_t n = 2 * (i % 10) + 1;
    const Tree x = sample_conditioned(m, n, derive_seed(8, {i, 0}));
    const Tree y = sample_conditioned(m, n, derive_seed(8, {i, 1}));
    const PairMeasure mu = joint_measure(x, y);
    const double defect = shift_defect(mu, m.types()).max_defect;
    worst_defect = std::max(worst_defect, defect * static_cast<double>(n));
    const PairMeasure p = reindex(mu);
    involution = involution && reindex(p).marked() == mu.marked();
    worst_view = std::max(worst_view, std::abs(expectation(rho, mu) - expectation(rho, p)));
  }
  o.require(worst_defect <= 1.0 + 1e-12, "n * shift defect reaches " + fmt(worst_defect));
  o.require(involution, "reindex is not an involution");
  o.require(worst_view <= 1e-14, "view dependence " + fmt(worst_view));
  if (o.pass)
    o.detail = "max n * defect = " + fmt(worst_defect) + ", view difference " + fmt(worst_view) + " over 1000 pairs";
  return o;
}

Outcome criterion9() {
  Outcome o;
  const GWModel m = mtdna_model(0.5);
  const Distortion rho = Distortion::type_hamming();
  auto outputs = [&](unsigned threads) {
    std::string all;
    AepOptions a;
    a.n_list = {3, 5, 7};
    a.trees_per_n = 8;
    a.seed = 17;
    a.threads = threads;
    const AepReport aep = verify_aep(m, m, rho, 0.25, a);
    all += aep.to_csv() + aep.to_json();
    a.mode = EvalMode::MonteCarlo;
    a.samples = 2000;
    const AepReport aep_mc = verify_aep(m, m, rho, 0.25, a);
    all += aep_mc.to_csv() + aep_mc.to_json();
    LdpOptions l;
    l.n_list = {3, 5, 7};
    l.mode = EvalMode::MonteCarlo;
    l.samples = 2000;
    l.z_points = 3;
    l.seed = 17;
    l.threads = threads;
    const LdpReport ldp = ldp_decay(m, m, rho, 0.0, 0.1, l);
    all += ldp.to_csv() + ldp.to_json();
    StationarityOptions s;
    s.n_list = {9, 15};
    s.samples = 500;
    s.seed = 17;
    s.threads = threads;
    const StationarityReport st = stationarity_check(m, m, s);
    all += st.to_csv() + st.to_json();
    return all;
  };
  const std::string base = outputs(1);
  for (unsigned threads : {1u, 2u, 4u, 8u})
    o.require(outputs(threads) == base, "outputs differ with " + std::to_string(threads) + " workers");
  if (o.pass) o.detail = "verify-aep (exact and Monte Carlo), ldp-decay and stationarity identical for 1, 2, 4, 8 workers";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path out_dir = argc > 1 ? argv[1] : "acceptance_output";
  struct Criterion {
    int id;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, 1.0, criterion1},
      {2, 1.0, criterion2},
      {3, 10.0, criterion3},
      {4, 1e9, criterion4},
      {5, 120.0, criterion5},
      {6, 120.0, criterion6},
      {7, 300.0, [&] { return criterion7(out_dir); }},
      {8, 30.0, criterion8},
      {9, 1e9, criterion9},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_s) o.require(false, "runtime " + fmt(secs) + " s over budget " + fmt(c.budget_s) + " s");
    std::printf("criterion %d: %s (%.2f s) %s\n", c.id, o.pass ? "PASS" : "FAIL", secs, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
