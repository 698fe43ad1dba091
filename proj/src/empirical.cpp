#include "gwrdt/empirical.hpp"

#include <algorithm>
#include <cmath>

#include "gwrdt/error.hpp"
#include "gwrdt/format.hpp"

namespace gwrdt {

PairedMarks to_paired(const MarkPair& p) { return {p.x.type, p.y.type, p.x.offspring, p.y.offspring}; }

MarkPair to_marked(const PairedMarks& p) { return {{p.type_x, p.offspring_x}, {p.type_y, p.offspring_y}}; }

const PairMeasure::MarkedTable& PairMeasure::marked() const {
  if (auto* t = std::get_if<MarkedTable>(&table_)) return *t;
  fail(ErrorCode::InvalidParameter, "measure is keyed by paired marks");
}

const PairMeasure::PairedTable& PairMeasure::paired() const {
  if (auto* t = std::get_if<PairedTable>(&table_)) return *t;
  fail(ErrorCode::InvalidParameter, "measure is keyed by marked pairs");
}

PairMeasure::MarkedTable& PairMeasure::marked() {
  if (auto* t = std::get_if<MarkedTable>(&table_)) return *t;
  fail(ErrorCode::InvalidParameter, "measure is keyed by paired marks");
}

PairMeasure::PairedTable& PairMeasure::paired() {
  if (auto* t = std::get_if<PairedTable>(&table_)) return *t;
  fail(ErrorCode::InvalidParameter, "measure is keyed by marked pairs");
}

double PairMeasure::total() const {
  return std::visit(
      [](const auto& t) {
        double s = 0.0;
        for (const auto& [k, w] : t) s += w;
        return s;
      },
      table_);
}

std::size_t PairMeasure::support_size() const {
  return std::visit(
      [](const auto& t) {
        return static_cast<std::size_t>(std::count_if(t.begin(), t.end(), [](const auto& kv) { return kv.second > 0.0; }));
      },
      table_);
}

namespace {

// Visits every atom as a MarkPair regardless of the stored view.
template <class F>
void for_each_pair(const PairMeasure& mu, F&& f) {
  if (mu.view() == MeasureView::MarkedPair) {
    for (const auto& [k, w] : mu.marked()) f(k, w);
  } else {
    for (const auto& [k, w] : mu.paired()) f(to_marked(k), w);
  }
}

}  // namespace

MarkMeasure offspring_measure(const Tree& t) {
  MarkMeasure m;
  const double w = 1.0 / static_cast<double>(t.size());
  for (auto& mark : vertex_marks(t)) m[std::move(mark)] += w;
  return m;
}

PairMeasure joint_measure(const Tree& tx, const Tree& ty) {
  if (tx.size() != ty.size())
    fail(ErrorCode::SizeMismatch, "trees have " + std::to_string(tx.size()) + " and " + std::to_string(ty.size()) +
                                      " vertices");
  PairMeasure::MarkedTable table;
  const double w = 1.0 / static_cast<double>(tx.size());
  for (std::size_t v = 0; v < tx.size(); ++v)
    table[{{tx.type(v), tx.offspring(v)}, {ty.type(v), ty.offspring(v)}}] += w;
  return PairMeasure(std::move(table));
}

PairMeasure reindex(const PairMeasure& mu) {
  if (mu.view() == MeasureView::MarkedPair) {
    PairMeasure::PairedTable out;
    for (const auto& [k, w] : mu.marked()) out[to_paired(k)] += w;
    return PairMeasure(std::move(out));
  }
  PairMeasure::MarkedTable out;
  for (const auto& [k, w] : mu.paired()) out[to_marked(k)] += w;
  return PairMeasure(std::move(out));
}

MarkMeasure mark_marginal(const PairMeasure& mu, int coordinate) {
  if (coordinate != 1 && coordinate != 2) fail(ErrorCode::InvalidParameter, "coordinate must be 1 or 2");
  MarkMeasure m;
  for_each_pair(mu, [&](const MarkPair& k, double w) { m[coordinate == 1 ? k.x : k.y] += w; });
  return m;
}

std::vector<double> type_marginal(const MarkMeasure& m, std::size_t types) {
  std::vector<double> out(types, 0.0);
  for (const auto& [k, w] : m) {
    if (k.type < 0 || static_cast<std::size_t>(k.type) >= types)
      fail(ErrorCode::InvalidSymbol, "type index " + std::to_string(k.type) + " outside the alphabet");
    out[static_cast<std::size_t>(k.type)] += w;
  }
  return out;
}

std::vector<double> type_pair_marginal(const PairMeasure& mu, std::size_t types) {
  std::vector<double> out(types * types, 0.0);
  for_each_pair(mu, [&](const MarkPair& k, double w) {
    if (k.x.type < 0 || k.y.type < 0 || static_cast<std::size_t>(k.x.type) >= types ||
        static_cast<std::size_t>(k.y.type) >= types)
      fail(ErrorCode::InvalidSymbol, "type index outside the alphabet");
    out[static_cast<std::size_t>(k.x.type) * types + static_cast<std::size_t>(k.y.type)] += w;
  });
  return out;
}

namespace {

std::vector<double> defects(const MarkMeasure& m, std::size_t types) {
  std::vector<double> d = type_marginal(m, types);
  for (const auto& [k, w] : m)
    for (TypeIndex c : k.offspring) {
      if (c < 0 || static_cast<std::size_t>(c) >= types)
        fail(ErrorCode::InvalidSymbol, "child type " + std::to_string(c) + " outside the alphabet");
      d[static_cast<std::size_t>(c)] -= w;
    }
  for (double& x : d) x = std::abs(x);
  return d;
}

}  // namespace

ShiftDefect shift_defect(const PairMeasure& mu, std::size_t types) {
  ShiftDefect out;
  out.per_type_first = defects(mark_marginal(mu, 1), types);
  out.per_type_second = defects(mark_marginal(mu, 2), types);
  for (double d : out.per_type_first) out.max_defect = std::max(out.max_defect, d);
  for (double d : out.per_type_second) out.max_defect = std::max(out.max_defect, d);
  return out;
}

namespace {

std::string csv_field(std::string s) {
  if (s.find(',') == std::string::npos && s.find('"') == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

}  // namespace

std::string measure_csv(const Alphabet& alphabet, const PairMeasure& mu) {
  std::string out = "mark1,mark2,weight\n";
  for_each_pair(mu, [&](const MarkPair& k, double w) {
    out += csv_field(format_mark(alphabet, k.x)) + ',' + csv_field(format_mark(alphabet, k.y)) + ',' +
           format_double(w) + '\n';
  });
  return out;
}

std::string measure_csv(const Alphabet& alphabet, const MarkMeasure& m) {
  std::string out = "mark,weight\n";
  for (const auto& [k, w] : m) out += csv_field(format_mark(alphabet, k)) + ',' + format_double(w) + '\n';
  return out;
}

}  // namespace gwrdt
