#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gwrdt/model.hpp"
#include "gwrdt/rng.hpp"

namespace gwrdt {

/// Mark of a vertex: its type and ordered offspring string.
struct VertexMark {
  TypeIndex type = 0;
  OffspringString offspring;

  auto operator<=>(const VertexMark&) const = default;
  bool operator==(const VertexMark&) const = default;
};

/// Finite typed ordered tree in breadth-first layout: vertex 0 is the root
/// and the children of vertex i occupy a contiguous index block that follows
/// the children of every vertex before i.
class Tree {
 public:
  /// Throws InvalidTree unless the child counts describe a connected BFS
  /// layout with exactly types.size() vertices.
  static Tree from_bfs(std::vector<TypeIndex> types, std::vector<int> child_counts);

  std::size_t size() const { return types_.size(); }
  TypeIndex type(std::size_t v) const { return types_[v]; }
  int child_count(std::size_t v) const { return child_counts_[v]; }
  /// -1 for the root.
  int parent(std::size_t v) const { return parent_[v]; }
  std::size_t first_child(std::size_t v) const { return first_child_[v]; }
  OffspringString offspring(std::size_t v) const;

  const std::vector<TypeIndex>& types() const { return types_; }
  const std::vector<int>& child_counts() const { return child_counts_; }

  bool operator==(const Tree& o) const { return types_ == o.types_ && child_counts_ == o.child_counts_; }
  std::strong_ordering operator<=>(const Tree& o) const {
    if (auto c = types_ <=> o.types_; c != 0) return c;
    return child_counts_ <=> o.child_counts_;
  }

 private:
  std::vector<TypeIndex> types_;
  std::vector<int> child_counts_;
  std::vector<int> parent_;
  std::vector<std::size_t> first_child_;
};

/// Marks in BFS order.
std::vector<VertexMark> vertex_marks(const Tree& t);
/// Inverse of vertex_marks. Throws InvalidTree when the marks are not
/// consistent with a BFS layout (child types must match the offspring
/// strings).
Tree tree_from_marks(const std::vector<VertexMark>& marks);

/// mu(root type) * prod_v K{offspring(v) | type(v)}; 0 if a factor is not a
/// kernel atom. Throws InvalidTree for types outside the alphabet or child
/// counts above the cap.
double tree_prob(const GWModel& model, const Tree& t);

/// Precomputed cumulative tables for drawing offspring strings.
class OffspringSampler {
 public:
  explicit OffspringSampler(const GWModel& model);
  const OffspringString& draw(TypeIndex parent, Rng& rng) const;
  TypeIndex draw_root(Rng& rng) const;

 private:
  std::vector<std::vector<double>> cumulative_;
  std::vector<std::vector<OffspringString>> strings_;
  std::vector<double> root_cumulative_;
};

inline constexpr std::size_t kDefaultSizeCap = 1'000'000;

/// One unconditioned realization, generated breadth-first. Returns nullopt
/// (Overflow) as soon as the vertex count exceeds size_cap.
std::optional<Tree> sample_tree(const GWModel& model, std::uint64_t seed,
                                std::size_t size_cap = kDefaultSizeCap);
std::optional<Tree> sample_tree(const OffspringSampler& sampler, Rng& rng, std::size_t size_cap);

/// Sizes s <= n_max for which P(|T| = s) > 0, as a 0/1 table indexed by s.
std::vector<char> achievable_sizes(const GWModel& model, std::size_t n_max);

inline constexpr std::uint64_t kDefaultMaxRejects = 10'000'000;

/// Rejection sampler for the law of the tree conditioned on |T| = n.
/// Construction throws NoSuchSize when n is unreachable.
class ConditionedSampler {
 public:
  ConditionedSampler(const GWModel& model, std::size_t n, std::uint64_t max_rejects = kDefaultMaxRejects);

  /// Throws ConditioningFailed after max_rejects rejections in one draw.
  Tree draw(Rng& rng);

  std::size_t n() const { return n_; }
  std::uint64_t attempts() const { return attempts_; }
  std::uint64_t accepted() const { return accepted_; }
  double acceptance_rate() const { return attempts_ ? static_cast<double>(accepted_) / static_cast<double>(attempts_) : 0.0; }

 private:
  OffspringSampler sampler_;
  std::size_t n_;
  std::uint64_t max_rejects_;
  std::uint64_t attempts_ = 0;
  std::uint64_t accepted_ = 0;
};

Tree sample_conditioned(const GWModel& model, std::size_t n, std::uint64_t seed,
                        std::uint64_t max_rejects = kDefaultMaxRejects);

struct WeightedTree {
  Tree tree;
  double prob;
};

struct WeightedTreeList {
  std::vector<WeightedTree> items;
  /// P(|T| = n).
  double total = 0.0;
};

inline constexpr std::size_t kDefaultEnumerationBudget = 2'000'000;

/// Every tree with exactly n vertices and positive probability, in
/// lexicographic BFS order. Throws CountExceeded past `budget` trees.
WeightedTreeList enumerate_trees(const GWModel& model, std::size_t n,
                                 std::size_t budget = kDefaultEnumerationBudget);

/// Text format: "n sym:childcount sym:childcount ..." in BFS order.
std::string format_tree(const Alphabet& alphabet, const Tree& t);
/// Throws ParseError for malformed lines, InvalidSymbol / InvalidTree for
/// bad content.
Tree parse_tree(const Alphabet& alphabet, std::string_view line);

/// "type|c1c2..." (children joined with ',' when symbols are longer than one
/// character).
std::string format_mark(const Alphabet& alphabet, const VertexMark& mark);
VertexMark parse_mark(const Alphabet& alphabet, std::string_view text);

}  // namespace gwrdt
