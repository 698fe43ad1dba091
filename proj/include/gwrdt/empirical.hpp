#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "gwrdt/model.hpp"
#include "gwrdt/trees.hpp"

namespace gwrdt {

using MarkMeasure = std::map<VertexMark, double>;

/// Atom of the marked-pair view: ((a, c), (a', c')).
struct MarkPair {
  VertexMark x;
  VertexMark y;
  auto operator<=>(const MarkPair&) const = default;
  bool operator==(const MarkPair&) const = default;
};

/// Atom of the paired-marks view: ((a, a'), (c, c')).
struct PairedMarks {
  TypeIndex type_x = 0;
  TypeIndex type_y = 0;
  OffspringString offspring_x;
  OffspringString offspring_y;
  auto operator<=>(const PairedMarks&) const = default;
  bool operator==(const PairedMarks&) const = default;
};

PairedMarks to_paired(const MarkPair& p);
MarkPair to_marked(const PairedMarks& p);

enum class MeasureView { MarkedPair, PairedMarks };

/// Probability table on pairs of vertex marks, in either of the two
/// equivalent keyings.
class PairMeasure {
 public:
  using MarkedTable = std::map<MarkPair, double>;
  using PairedTable = std::map<PairedMarks, double>;

  PairMeasure() : table_(MarkedTable{}) {}
  explicit PairMeasure(MarkedTable t) : table_(std::move(t)) {}
  explicit PairMeasure(PairedTable t) : table_(std::move(t)) {}

  MeasureView view() const { return table_.index() == 0 ? MeasureView::MarkedPair : MeasureView::PairedMarks; }
  const MarkedTable& marked() const;
  const PairedTable& paired() const;
  MarkedTable& marked();
  PairedTable& paired();

  double total() const;
  std::size_t support_size() const;

 private:
  std::variant<MarkedTable, PairedTable> table_;
};

struct ShiftDefect {
  std::vector<double> per_type_first;
  std::vector<double> per_type_second;
  double max_defect = 0.0;
};

/// (1/n) sum_v delta_{mark(v)}.
MarkMeasure offspring_measure(const Tree& t);

/// (1/n) sum_v delta_{(mark_x(v), mark_y(v))}, pairing vertices by BFS index.
/// Throws SizeMismatch.
PairMeasure joint_measure(const Tree& tx, const Tree& ty);

/// Re-keys between the two views; mass preserving and an involution.
PairMeasure reindex(const PairMeasure& mu);

/// First (or second) mark marginal.
MarkMeasure mark_marginal(const PairMeasure& mu, int coordinate);
/// Type marginal of a mark measure, over `types` entries.
std::vector<double> type_marginal(const MarkMeasure& m, std::size_t types);
/// Joint type-pair marginal, flat index a * types + a'.
std::vector<double> type_pair_marginal(const PairMeasure& mu, std::size_t types);

/// Per-type absolute defects of nu_{i,1}(a) = sum_{(b,c)} m(a,c) nu_i(b,c)
/// for both coordinates. Accepts either view.
ShiftDefect shift_defect(const PairMeasure& mu, std::size_t types);

/// CSV with columns mark1,mark2,weight (marks as "type|c1c2...").
std::string measure_csv(const Alphabet& alphabet, const PairMeasure& mu);
std::string measure_csv(const Alphabet& alphabet, const MarkMeasure& m);

}  // namespace gwrdt
