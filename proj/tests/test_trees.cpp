#include <cmath>
#include <map>
#include <set>

#include <doctest.h>

#include "gwrdt/error.hpp"
#include "gwrdt/model.hpp"
#include "gwrdt/rng.hpp"
#include "gwrdt/trees.hpp"

using namespace gwrdt;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

double catalan(int k) {
  double c = 1.0;
  for (int i = 0; i < k; ++i) c = c * 2.0 * (2.0 * i + 1.0) / (i + 2.0);
  return c;
}

// Ordered typed binary trees with n vertices under the mtdna support rules:
// mutant parents only have mutant children.
double count_mtdna(int type, int n) {
  if (n == 1) return 1.0;
  double total = 0.0;
  for (int l = 1; l < n - 1; ++l) {
    const int r = n - 1 - l;
    if (type == 0) {
      total += count_mtdna(0, l) * count_mtdna(0, r);
    } else {
      total += (count_mtdna(0, l) + count_mtdna(1, l)) * (count_mtdna(0, r) + count_mtdna(1, r));
    }
  }
  return total;
}

}  // namespace

TEST_CASE("bfs layout validation") {
  const Tree t = Tree::from_bfs({1, 0, 1}, {2, 0, 0});
  CHECK(t.size() == 3);
  CHECK(t.parent(2) == 0);
  CHECK(t.first_child(0) == 1);
  CHECK(t.offspring(0) == OffspringString{0, 1});
  CHECK(code_of([] { Tree::from_bfs({1, 0}, {2, 0}); }) == ErrorCode::InvalidTree);
  CHECK(code_of([] { Tree::from_bfs({1, 0, 0}, {1, 0, 0}); }) == ErrorCode::InvalidTree);
  CHECK(code_of([] { Tree::from_bfs({}, {}); }) == ErrorCode::InvalidTree);
  CHECK(code_of([] { Tree::from_bfs({1}, {-1}); }) == ErrorCode::InvalidTree);
}

TEST_CASE("text format round trip") {
  const GWModel m = mtdna_model(0.5);
  const Tree t = Tree::from_bfs({1, 1, 0, 0, 0}, {2, 2, 0, 0, 0});
  const std::string s = format_tree(m.alphabet, t);
  CHECK(s == "5 1:2 1:2 0:0 0:0 0:0");
  CHECK(parse_tree(m.alphabet, s) == t);
  CHECK(code_of([&] { parse_tree(m.alphabet, "3 1:2 0:0"); }) == ErrorCode::ParseError);
  CHECK(code_of([&] { parse_tree(m.alphabet, "1 x:0"); }) == ErrorCode::InvalidSymbol);
  CHECK(code_of([&] { parse_tree(m.alphabet, "2 1:0 0:0"); }) == ErrorCode::InvalidTree);
  const VertexMark mk{1, {0, 1}};
  CHECK(format_mark(m.alphabet, mk) == "1|01");
  CHECK(parse_mark(m.alphabet, "1|01") == mk);
  CHECK(tree_from_marks(vertex_marks(t)) == t);
}

TEST_CASE("tree probability") {
  const double a = 0.2;
  const GWModel m = mtdna_model(a);
  const Tree t = Tree::from_bfs({1, 0, 1}, {2, 0, 0});
  CHECK(tree_prob(m, t) == doctest::Approx(0.5 * a * (1 - a) * 0.5 * 0.5));
  // Mutant root has zero root mass.
  CHECK(tree_prob(m, Tree::from_bfs({0}, {0})) == 0.0);
  // Normal child of a mutant is not a kernel atom.
  CHECK(tree_prob(m, Tree::from_bfs({1, 0, 0, 1, 0}, {2, 2, 0, 0, 0})) == 0.0);
  CHECK(code_of([&] { tree_prob(m, Tree::from_bfs({1, 1, 1, 1}, {3, 0, 0, 0})); }) == ErrorCode::InvalidTree);
  CHECK(code_of([&] { tree_prob(m, Tree::from_bfs({2}, {0})); }) == ErrorCode::InvalidTree);
}

TEST_CASE("enumeration matches the Catalan size law and the typed count") {
  const GWModel m = mtdna_model(0.5);
  for (int k = 0; k <= 4; ++k) {
    const int n = 2 * k + 1;
    const auto list = enumerate_trees(m, static_cast<std::size_t>(n));
    CHECK(list.total == doctest::Approx(catalan(k) * std::pow(0.5, n)).epsilon(1e-12));
    CHECK(static_cast<double>(list.items.size()) == count_mtdna(1, n));
    double sum = 0.0;
    std::set<Tree> seen;
    for (std::size_t i = 0; i < list.items.size(); ++i) {
      const auto& w = list.items[i];
      CHECK(w.tree.size() == static_cast<std::size_t>(n));
      CHECK(w.prob == doctest::Approx(tree_prob(m, w.tree)));
      CHECK(w.prob > 0.0);
      if (i > 0) CHECK(list.items[i - 1].tree < w.tree);
      seen.insert(w.tree);
      sum += w.prob;
    }
    CHECK(seen.size() == list.items.size());
    CHECK(sum == doctest::Approx(list.total).epsilon(1e-12));
  }
  CHECK(enumerate_trees(m, 4).items.empty());
  CHECK(code_of([&] { enumerate_trees(m, 9, 10); }) == ErrorCode::CountExceeded);
}

TEST_CASE("achievable sizes") {
  const auto s = achievable_sizes(mtdna_model(0.5), 12);
  for (std::size_t n = 1; n <= 12; ++n) CHECK(static_cast<bool>(s[n]) == (n % 2 == 1));
  const auto chain = achievable_sizes(chain_toy_model(0.5), 6);
  for (std::size_t n = 1; n <= 6; ++n) CHECK_FALSE(chain[n]);
}

TEST_CASE("unconditioned sizes follow the binomial law") {
  const GWModel m = mtdna_model(0.5);
  const int runs = 20000;
  int ones = 0, threes = 0, overflow = 0;
  for (int i = 0; i < runs; ++i) {
    const auto t = sample_tree(m, derive_seed(11, {static_cast<std::uint64_t>(i)}), 1000);
    if (!t) {
      ++overflow;
      continue;
    }
    ones += t->size() == 1;
    threes += t->size() == 3;
  }
  auto within = [&](int hits, double p) {
    const double sd = std::sqrt(p * (1 - p) / runs);
    return std::abs(hits / static_cast<double>(runs) - p) <= 4.0 * sd;
  };
  CHECK(within(ones, 0.5));
  CHECK(within(threes, 0.125));
  // P(|T| > 1000) is about 0.025 for a critical binary tree.
  CHECK(overflow < runs / 10);
}

TEST_CASE("conditioned sampler agrees with enumeration") {
  const GWModel m = mtdna_model(0.5);
  const auto list = enumerate_trees(m, 5);
  std::map<Tree, double> expect;
  for (const auto& w : list.items) expect[w.tree] = w.prob / list.total;
  ConditionedSampler s(m, 5);
  Rng rng(3);
  const int draws = 20000;
  std::map<Tree, double> freq;
  for (int i = 0; i < draws; ++i) freq[s.draw(rng)] += 1.0 / draws;
  double tv = 0.0;
  for (const auto& [t, p] : expect) tv += std::abs(p - (freq.count(t) ? freq[t] : 0.0));
  for (const auto& [t, p] : freq) {
    CHECK(expect.count(t) == 1);
    if (!expect.count(t)) tv += p;
  }
  CHECK(0.5 * tv < 0.03);
  CHECK(s.acceptance_rate() == doctest::Approx(list.total).epsilon(0.1));
}

TEST_CASE("conditioned sampler errors and determinism") {
  const GWModel m = mtdna_model(0.5);
  CHECK(code_of([&] { ConditionedSampler(m, 4); }) == ErrorCode::NoSuchSize);
  CHECK(code_of([&] { sample_conditioned(m, 201, 5, 1); }) == ErrorCode::ConditioningFailed);
  CHECK(sample_conditioned(m, 9, 42) == sample_conditioned(m, 9, 42));
  CHECK(sample_tree(m, 8) == sample_tree(m, 8));
}

TEST_CASE("small-size enumerations and probabilities") {
  const GWModel m = mtdna_model(0.5);
  CHECK(tree_prob(m, Tree::from_bfs({1}, {0})) == doctest::Approx(0.5));
  CHECK(tree_prob(m, Tree::from_bfs({1, 1, 1}, {2, 0, 0})) == doctest::Approx(1.0 / 32));
  const auto three = enumerate_trees(m, 3);
  REQUIRE(three.items.size() == 4);
  for (const auto& w : three.items) CHECK(w.prob == doctest::Approx(1.0 / 32));
  CHECK(three.total == doctest::Approx(0.125));
  const auto two = enumerate_trees(m, 2);
  CHECK(two.items.empty());
  CHECK(two.total == 0.0);
  const auto one = enumerate_trees(uniform_binary_model(), 1);
  CHECK(one.items.size() == 2);
  CHECK(sample_conditioned(m, 1, 3) == Tree::from_bfs({1}, {0}));
  const Tree t = Tree::from_bfs({1, 1, 0}, {2, 0, 0});
  const auto marks = vertex_marks(t);
  REQUIRE(marks.size() == 3);
  CHECK(marks[0] == VertexMark{1, {1, 0}});
  CHECK(marks[1] == VertexMark{1, {}});
  CHECK(marks[2] == VertexMark{0, {}});
  CHECK(vertex_marks(Tree::from_bfs({0}, {0})) == std::vector<VertexMark>{VertexMark{0, {}}});
}

TEST_CASE("size cap of one splits the seeds in half") {
  const GWModel m = mtdna_model(0.5);
  const int runs = 10000;
  int singles = 0;
  for (int i = 0; i < runs; ++i) {
    const auto t = sample_tree(m, static_cast<std::uint64_t>(i), 1);
    if (t) {
      CHECK(t->size() == 1);
      ++singles;
    }
  }
  CHECK(std::abs(singles / static_cast<double>(runs) - 0.5) <= 3.0 * std::sqrt(0.25 / runs));
}

TEST_CASE("sampled trees respect the kernel support") {
  const GWModel m = mtdna_model(0.4);
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto t = sample_tree(m, s, 500);
    if (!t) continue;
    CHECK(tree_prob(m, *t) > 0.0);
    for (std::size_t v = 1; v < t->size(); ++v)
      if (t->type(static_cast<std::size_t>(t->parent(v))) == 0) CHECK(t->type(v) == 0);
  }
}

TEST_CASE("conditioned frequency of the all-normal cherry") {
  const GWModel m = mtdna_model(0.5);
  const Tree cherry = Tree::from_bfs({1, 1, 1}, {2, 0, 0});
  ConditionedSampler s(m, 3);
  Rng rng(17);
  const int draws = 100000;
  int hits = 0;
  for (int i = 0; i < draws; ++i) hits += s.draw(rng) == cherry;
  CHECK(std::abs(hits / static_cast<double>(draws) - 0.25) <= 3.0 * std::sqrt(0.25 * 0.75 / draws));
}
