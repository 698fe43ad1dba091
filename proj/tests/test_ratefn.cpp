#include <cmath>
#include <limits>
#include <random>

#include <doctest.h>

#include "gwrdt/distortion.hpp"
#include "gwrdt/empirical.hpp"
#include "gwrdt/error.hpp"
#include "gwrdt/model.hpp"
#include "gwrdt/ratefn.hpp"
#include "gwrdt/spectral.hpp"
#include "gwrdt/trees.hpp"

using namespace gwrdt;

namespace {

// Binary relative entropy H(d || 1/2) in nats.
double binary_kl_half(double d) {
  auto term = [](double p) { return p > 0.0 ? p * std::log(2.0 * p) : 0.0; };
  return term(d) + term(1.0 - d);
}

// (1/n) sum_x P_n(x) log sum_y Q_n(y) exp(t n rho_n(x, y)) by direct double
// enumeration.
double brute_lambda_n(double t, const GWModel& mx, const GWModel& my, std::size_t n, const Distortion& rho) {
  const auto px = enumerate_trees(mx, n);
  const auto qy = enumerate_trees(my, n);
  double outer = 0.0;
  for (const auto& x : px.items) {
    double inner = 0.0;
    for (const auto& y : qy.items)
      inner += (y.prob / qy.total) * std::exp(t * static_cast<double>(n) * tree_distortion(rho, x.tree, y.tree));
    outer += (x.prob / px.total) * std::log(inner);
  }
  return outer / static_cast<double>(n);
}

// Minimum of I_1 over the shift-invariant measures with <rho, nu> = z for x
// alternating, y chain-toy(1/2) and type Hamming distortion, by grid search.
// Marks x: A = 0|1, B = 1|0; marks y: a = 0|0, b = 0|1, c = 1|0. Shift
// invariance forces nu(A, .) = nu(B, .) = 1/2 and nu(., b) = nu(., c), which
// leaves p1 = nu(A, a) and p2 = nu(A, b) free once z is fixed.
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
      const double q1 = pc + rc;
      const double by[3] = {0.5 * q0, 0.5 * q0, q1};
      const double nu[2][3] = {{p1, p2, pc}, {r1, r2, rc}};
      double v = 0.0;
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 3; ++y) v += term(nu[x][y], 0.5 * by[y]);
      best = std::min(best, v);
    }
  }
  return best;
}

struct Quadratic final : ConvexFunction {
  // lambda(t) = t^2 / 2 + m t, whose transform is (d - m)^2 / 2.
  double m;
  explicit Quadratic(double mean) : m(mean) {}
  double value(double t) const override { return 0.5 * t * t + m * t; }
  double derivative(double t) const override { return t + m; }
  double slope_at_minus_infinity() const override { return -std::numeric_limits<double>::infinity(); }
};

}  // namespace

TEST_CASE("relative entropy") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + trial % 6;
    std::vector<double> p(k), q(k);
    double sp = 0, sq = 0;
    for (int i = 0; i < k; ++i) {
      p[i] = u(gen);
      q[i] = u(gen) + 1e-3;
      sp += p[i];
      sq += q[i];
    }
    double direct = 0.0;
    for (int i = 0; i < k; ++i) {
      p[i] /= sp;
      q[i] /= sq;
    }
    for (int i = 0; i < k; ++i) direct += p[i] * std::log(p[i] / q[i]);
    const ExtReal h = rel_entropy(p, q);
    REQUIRE(h.is_finite());
    CHECK(h.value() >= 0.0);
    CHECK(h.value() == doctest::Approx(direct).epsilon(1e-12));
  }
  CHECK(rel_entropy(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 0.0}).is_inf());
  CHECK(rel_entropy(std::vector<double>{1.0, 0.0}, std::vector<double>{0.5, 0.5}).value() ==
        doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(rel_entropy(std::vector<double>{1.0}, std::vector<double>{0.5, 0.5}), Error);
}

TEST_CASE("limit log-MGF of the mtdna model under type Hamming") {
  const GWModel m = mtdna_model(0.5);
  const auto pi = stationary_pair(m, m);
  const Distortion rho = Distortion::type_hamming();
  for (auto order : {LambdaOrder::SourceInner, LambdaOrder::CodebookInner}) {
    const LambdaInf lam(pi, m.kernel, m.kernel, rho, order);
    CHECK(lam.value(0.0) == 0.0);
    CHECK(std::abs(lam.value(1.0) - std::log((1.0 + std::exp(1.0)) / 2.0)) <= 1e-10);
    for (double t = -6.0; t <= 3.0; t += 0.25) {
      CHECK(lam.value(t) == doctest::Approx(std::log((1.0 + std::exp(t)) / 2.0)).epsilon(1e-12));
      const double h = 1e-5;
      CHECK(lam.derivative(t) == doctest::Approx((lam.value(t + h) - lam.value(t - h)) / (2 * h)).epsilon(1e-6));
      CHECK(lam.value(t) <= 0.5 * (lam.value(t - 0.5) + lam.value(t + 0.5)) + 1e-14);
    }
    CHECK(std::abs(lam.derivative(0.0) - d_average(pi, m.kernel, m.kernel, rho)) <= 1e-8);
    CHECK(lam.slope_at_minus_infinity() == doctest::Approx(0.0));
  }
  CHECK(d_average(pi, m.kernel, m.kernel, rho) == doctest::Approx(0.5));
}

TEST_CASE("rate-distortion curve is the binary relative entropy") {
  const GWModel m = mtdna_model(0.5);
  const auto pi = stationary_pair(m, m);
  const LambdaInf lam(pi, m.kernel, m.kernel, Distortion::type_hamming());
  for (double d = 0.01; d < 0.5; d += 0.01)
    CHECK(std::abs(rd_function(d, lam, 0.0, 0.5).value() - binary_kl_half(d)) <= 1e-8);
  CHECK(std::abs(rd_function(0.25, lam, 0.0, 0.5).value() - 0.130812) <= 1e-6);
  CHECK(std::abs(rd_function(1e-6, lam, 0.0, 0.5).value() - std::log(2.0)) <= 1e-3);
  CHECK(std::abs(rd_function(0.5, lam, 0.0, 0.5).value()) <= 1e-8);
  CHECK(rd_function(0.7, lam, 0.0, 0.5).value() == 0.0);
  CHECK(rd_function(-0.1, lam, 0.0, 0.5).is_inf());
  double prev = std::numeric_limits<double>::infinity();
  for (double d = 0.0; d <= 0.6; d += 0.02) {
    const double r = rd_function(d, lam, 0.0, 0.5).value();
    CHECK(r <= prev + 1e-12);
    prev = r;
  }
}

TEST_CASE("Legendre transform of a quadratic") {
  const Quadratic q(1.0);
  for (double d = -2.0; d < 1.0; d += 0.25)
    CHECK(rd_function(d, q, -1e300, 1.0).value() == doctest::Approx(0.5 * (d - 1.0) * (d - 1.0)).epsilon(1e-9));
}

TEST_CASE("finite-n log-MGF against double enumeration") {
  const GWModel m = mtdna_model(0.5);
  const GWModel my = mtdna_model(0.2);
  const Distortion rho = Distortion::mark_hamming(2);
  for (std::size_t n : {1u, 3u, 5u}) {
    const LambdaN lam(m, my, n, rho);
    for (double t : {-3.0, -1.0, -0.2, 0.0, 0.5}) {
      CHECK(lam.value(t) == doctest::Approx(brute_lambda_n(t, m, my, n, rho)).epsilon(1e-12));
      const double h = 1e-5;
      CHECK(lam.derivative(t) == doctest::Approx((lam.value(t + h) - lam.value(t - h)) / (2 * h)).epsilon(1e-6));
    }
    CHECK(lam.value(0.0) == 0.0);
    CHECK(lam.standard_error(-1.0) == 0.0);
    const double slope = lam.slope_at_minus_infinity();
    CHECK(slope == doctest::Approx(d_min_n(m, my, n, rho)));
    CHECK(lam.value(-200.0) / -200.0 == doctest::Approx(slope).epsilon(0.05));
  }
}

TEST_CASE("Monte Carlo log-MGF agrees with the exact value") {
  const GWModel m = mtdna_model(0.5);
  const Distortion rho = Distortion::type_hamming();
  LambdaNOptions mc;
  mc.mode = EvalMode::MonteCarlo;
  mc.samples = 4000;
  mc.seed = 9;
  const LambdaN exact(m, m, 7, rho);
  const LambdaN approx(m, m, 7, rho, mc);
  for (double t : {-2.0, -0.5}) {
    CHECK(approx.value(0.0) == 0.0);
    const double se = approx.standard_error(t);
    CHECK(se > 0.0);
    CHECK(std::abs(approx.value(t) - exact.value(t)) <= 4.0 * se);
  }
}

TEST_CASE("distortion profile") {
  const GWModel m = mtdna_model(0.5);
  const CodebookEnsemble ens(m, 5);
  const auto list = enumerate_trees(m, 5);
  const Tree x = list.items.front().tree;
  const Distortion rho = Distortion::type_hamming();
  const DistortionProfile p = ens.profile(x, rho);
  double w = 0.0;
  for (std::size_t i = 0; i < p.totals.size(); ++i) {
    if (i > 0) CHECK(p.totals[i] > p.totals[i - 1]);
    w += p.weights[i];
  }
  CHECK(w == doctest::Approx(1.0));
  double le2 = 0.0, open = 0.0, mgf = 0.0;
  for (const auto& y : list.items) {
    const double total = 5.0 * tree_distortion(rho, x, y.tree);
    const double q = y.prob / list.total;
    if (total <= 2.0) le2 += q;
    if (total > 1.0 && total < 3.0) open += q;
    mgf += q * std::exp(-0.7 * total);
  }
  CHECK(p.cdf(2.0) == doctest::Approx(le2));
  CHECK(p.open_interval(1.0, 3.0) == doctest::Approx(open));
  CHECK(p.log_mgf(-0.7) == doctest::Approx(std::log(mgf)));
  CHECK_THROWS_AS(ens.profile(Tree::from_bfs({1}, {0}), rho), Error);
}

TEST_CASE("process-level rate functions") {
  const GWModel m = mtdna_model(0.5);
  const Tree x = Tree::from_bfs({1, 0, 1}, {2, 0, 0});
  const PairMeasure mu = joint_measure(x, x);
  // The empirical measure of a finite tree carries a 1/n root defect.
  CHECK(rate_I1(mu, m.kernel, m.kernel, 0.1).value.is_inf());
  const RateValue loose = rate_I1(mu, m.kernel, m.kernel, 0.5);
  REQUIRE(loose.value.is_finite());

  // Direct evaluation: base(i, j) = q_x(type i) K(c_i | type i) q_y(type j) K(c_j | type j).
  const auto qx = type_marginal(mark_marginal(mu, 1), 2);
  double direct = 0.0;
  for (const auto& [pair, w] : mu.marked()) {
    const double bx = qx[pair.x.type] * m.kernel.prob(pair.x.type, pair.x.offspring);
    const double by = qx[pair.y.type] * m.kernel.prob(pair.y.type, pair.y.offspring);
    direct += w * std::log(w / (bx * by));
  }
  CHECK(loose.value.value() == doctest::Approx(direct));
  CHECK(rate_I2(reindex(mu), m.kernel, m.kernel, 0.5).value.is_finite());
}

TEST_CASE("i_rho on a cap-1 toy matches grid search") {
  const IRhoSolver solver(alternating_model(), chain_toy_model(0.5), Distortion::type_hamming());
  CHECK(solver.z_min() == doctest::Approx(0.0));
  CHECK(solver.z_max() == doctest::Approx(1.0));
  std::vector<double> values;
  for (int k = 0; k <= 8; ++k) {
    const double z = k / 8.0;
    const IRhoResult r = solver.solve(z);
    REQUIRE(r.rate.value.is_finite());
    CHECK(r.constraint_residual <= 1e-9);
    CHECK(std::abs(r.rate.value.value() - toy_grid_min(z, 1e-3)) <= 2e-3);
    values.push_back(r.rate.value.value());
  }
  for (std::size_t i = 1; i + 1 < values.size(); ++i)
    CHECK(values[i] <= 0.5 * (values[i - 1] + values[i + 1]) + 1e-4);
  CHECK(solver.solve(1.2).rate.value.is_inf());
  CHECK(solver.solve(-0.1).rate.value.is_inf());
}

TEST_CASE("i_rho vanishes at the average distortion") {
  const GWModel m = uniform_binary_model();
  const Distortion rho = Distortion::type_hamming();
  const auto pi = stationary_pair(m, m);
  const double dav = d_average(pi, m.kernel, m.kernel, rho);
  CHECK(dav == doctest::Approx(0.5));
  const IRhoSolver solver(m, m, rho);
  CHECK(std::abs(solver.solve(dav).rate.value.value()) <= 1e-6);
  std::vector<double> values;
  for (int k = 0; k <= 8; ++k) values.push_back(solver.solve(0.1 + 0.1 * k).rate.value.value());
  for (std::size_t i = 1; i + 1 < values.size(); ++i)
    CHECK(values[i] <= 0.5 * (values[i - 1] + values[i + 1]) + 1e-4);
  CHECK(values.front() > values[4]);
}

TEST_CASE("rd summary") {
  const GWModel m = mtdna_model(0.5);
  RdSummaryOptions o;
  o.d_grid = {0.0, 0.25, 0.5};
  o.t_grid = {-1.0, 0.0};
  o.n_list = {3, 4, 5};
  const RDSummary s = rd_summary(m, m, Distortion::type_hamming(), o);
  CHECK(s.d_av == doctest::Approx(0.5));
  CHECK(s.d_min == doctest::Approx(0.0));
  REQUIRE(s.curve.size() == 3);
  CHECK(s.curve[1].second.value() == doctest::Approx(binary_kl_half(0.25)).epsilon(1e-9));
  REQUIRE(s.reference_threshold.has_value());
  CHECK(*s.reference_threshold == doctest::Approx(mtdna_threshold(0.5)));
  CHECK(mtdna_threshold(0.5) == doctest::Approx(0.75 * 0.5 + 0.25 * 0.5 * 0.125));
  CHECK(s.d_min_n.size() == 2);
  CHECK(s.curve_csv().rfind("d,R\n", 0) == 0);
  CHECK(s.lambda_csv().rfind("t,lambda\n", 0) == 0);
}

TEST_CASE("finite-n log-MGF drifts toward the left-vector limit") {
  const GWModel m = mtdna_model(0.5);
  const Distortion rho = Distortion::type_hamming();
  // The left Perron vector puts all mass on the mutant pair, where type
  // Hamming distortion vanishes, so that limit is identically 0.
  const auto left = stationary_pair_left(m, m);
  const LambdaInf limit(left, m.kernel, m.kernel, rho);
  CHECK(std::abs(limit.value(-2.0)) <= 1e-8);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t n : {3u, 5u, 7u, 9u}) {
    const double gap = std::abs(LambdaN(m, m, n, rho).value(-2.0) - limit.value(-2.0));
    CHECK(gap < prev);
    prev = gap;
  }
}

TEST_CASE("single-vertex laws give a flat log-MGF and zero minimum distortion") {
  const GWModel m = mtdna_model(0.5);
  const Distortion rho = Distortion::type_hamming();
  const LambdaN one(m, m, 1, rho);
  for (double t : {-5.0, -1.0, 2.0}) CHECK(one.value(t) == doctest::Approx(0.0));
  CHECK(d_min_n(m, m, 1, rho) == 0.0);
  CHECK(d_min_n(m, m, 3, rho) == 0.0);
  const Distortion floor = Distortion::table({}, 0.25);
  CHECK(d_min_n(m, m, 3, floor) >= 0.25 - 1e-15);
  const LambdaNValue v = lambda_n(-1.0, m, m, 3, rho);
  CHECK(v.value == doctest::Approx(LambdaN(m, m, 3, rho).value(-1.0)));
  CHECK(v.standard_error == 0.0);
}

TEST_CASE("worked relative entropy values") {
  CHECK(rel_entropy(std::vector<double>{0.5, 0.5}, std::vector<double>{0.25, 0.75}).value() ==
        doctest::Approx(0.143841).epsilon(1e-5));
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> p{u(gen), u(gen), u(gen)};
    const double s = p[0] + p[1] + p[2];
    for (double& x : p) x /= s;
    CHECK(rel_entropy(p, p).value() == doctest::Approx(0.0));
  }
}

TEST_CASE("rate functions vanish on the stationary product measure") {
  const GWModel m = uniform_binary_model();
  PairMeasure::MarkedTable table;
  for (TypeIndex ax = 0; ax < 2; ++ax)
    for (const auto& atom_x : m.kernel.atoms(ax))
      for (TypeIndex ay = 0; ay < 2; ++ay)
        for (const auto& atom_y : m.kernel.atoms(ay))
          table[MarkPair{VertexMark{ax, atom_x.children}, VertexMark{ay, atom_y.children}}] =
              0.5 * atom_x.p * 0.5 * atom_y.p;
  const PairMeasure nu(table);
  CHECK(std::abs(rate_I1(nu, m.kernel, m.kernel, 1e-9).value.value()) <= 1e-12);
  CHECK(std::abs(rate_I2(reindex(nu), m.kernel, m.kernel, 1e-9).value.value()) <= 1e-12);

  // Moving 0.3 of the mass onto a childless pair breaks shift invariance.
  PairMeasure::MarkedTable skewed;
  for (const auto& [k, w] : table) skewed[k] = 0.7 * w;
  skewed[MarkPair{VertexMark{0, {}}, VertexMark{0, {}}}] += 0.3;
  CHECK(rate_I1(PairMeasure(skewed), m.kernel, m.kernel, 1e-9).value.is_inf());
  CHECK(rate_I2(reindex(PairMeasure(skewed)), m.kernel, m.kernel, 1e-9).value.is_inf());
}

TEST_CASE("I1 and I2 agree on product measures") {
  const GWModel m = mtdna_model(0.5);
  for (std::uint64_t i = 0; i < 50; ++i) {
    const std::size_t n = 2 * (i % 5) + 3;
    const MarkMeasure mx = offspring_measure(sample_conditioned(m, n, 300 + i));
    const MarkMeasure my = offspring_measure(sample_conditioned(m, n, 600 + i));
    PairMeasure::MarkedTable table;
    for (const auto& [a, wa] : mx)
      for (const auto& [b, wb] : my) table[MarkPair{a, b}] = wa * wb;
    const PairMeasure nu(table);
    const double tol = 1.0 / static_cast<double>(n) + 1e-12;
    const RateValue i1 = rate_I1(nu, m.kernel, m.kernel, tol);
    const RateValue i2 = rate_I2(reindex(nu), m.kernel, m.kernel, tol);
    REQUIRE(i1.value.is_finite());
    REQUIRE(i2.value.is_finite());
    CHECK(i1.value.value() >= 0.0);
    CHECK(i1.value.value() == doctest::Approx(i2.value.value()).epsilon(1e-12));
  }
}

TEST_CASE("log-MGF derivative matches central differences") {
  const GWModel m = mtdna_model(0.5);
  const auto pi = stationary_pair(m, m);
  for (const Distortion& rho : {Distortion::type_hamming(), Distortion::mark_hamming(2)}) {
    const LambdaInf lam(pi, m.kernel, m.kernel, rho);
    const double h = 1e-5;
    CHECK(std::abs((lam.value(h) - lam.value(-h)) / (2 * h) - lam.derivative(0.0)) <= 1e-8);
    for (double t = -5.0; t <= 5.0; t += 0.5) CHECK(lam.value(t) <= 0.5 * (lam.value(t - 0.5) + lam.value(t + 0.5)) + 1e-12);
  }
  const Distortion zero = Distortion::zero();
  CHECK(d_average(pi, m.kernel, m.kernel, zero) == 0.0);
  RdSummaryOptions o;
  o.d_grid = {0.0, 0.1, 1.0};
  const RDSummary s = rd_summary(m, m, zero, o);
  CHECK(s.d_min == 0.0);
  CHECK(s.d_av == 0.0);
  for (const auto& [d, r] : s.curve) CHECK(r.value() == 0.0);
}
