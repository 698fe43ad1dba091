#include "gwrdt/trees.hpp"

#include <algorithm>
#include <charconv>

#include "gwrdt/error.hpp"
#include "gwrdt/format.hpp"

namespace gwrdt {

Tree Tree::from_bfs(std::vector<TypeIndex> types, std::vector<int> child_counts) {
  const std::size_t n = types.size();
  if (n == 0) fail(ErrorCode::InvalidTree, "a tree has at least one vertex");
  if (child_counts.size() != n)
    fail(ErrorCode::InvalidTree, "got " + std::to_string(n) + " types but " + std::to_string(child_counts.size()) +
                                     " child counts");
  Tree t;
  t.parent_.assign(n, -1);
  t.first_child_.assign(n, 0);
  std::size_t discovered = 1;
  for (std::size_t v = 0; v < n; ++v) {
    if (types[v] < 0) fail(ErrorCode::InvalidTree, "negative type at vertex " + std::to_string(v));
    if (child_counts[v] < 0) fail(ErrorCode::InvalidTree, "negative child count at vertex " + std::to_string(v));
    if (v >= discovered) fail(ErrorCode::InvalidTree, "vertex " + std::to_string(v) + " is not attached to the tree");
    t.first_child_[v] = discovered;
    const auto c = static_cast<std::size_t>(child_counts[v]);
    if (discovered + c > n)
      fail(ErrorCode::InvalidTree, "child counts describe more than " + std::to_string(n) + " vertices");
    for (std::size_t j = 0; j < c; ++j) t.parent_[discovered + j] = static_cast<int>(v);
    discovered += c;
  }
  if (discovered != n)
    fail(ErrorCode::InvalidTree, "child counts describe " + std::to_string(discovered) + " vertices, expected " +
                                     std::to_string(n));
  t.types_ = std::move(types);
  t.child_counts_ = std::move(child_counts);
  return t;
}

OffspringString Tree::offspring(std::size_t v) const {
  const std::size_t first = first_child_[v];
  return OffspringString(types_.begin() + static_cast<std::ptrdiff_t>(first),
                         types_.begin() + static_cast<std::ptrdiff_t>(first + static_cast<std::size_t>(child_counts_[v])));
}

std::vector<VertexMark> vertex_marks(const Tree& t) {
  std::vector<VertexMark> out;
  out.reserve(t.size());
  for (std::size_t v = 0; v < t.size(); ++v) out.push_back({t.type(v), t.offspring(v)});
  return out;
}

Tree tree_from_marks(const std::vector<VertexMark>& marks) {
  std::vector<TypeIndex> types;
  std::vector<int> counts;
  types.reserve(marks.size());
  counts.reserve(marks.size());
  for (const auto& m : marks) {
    types.push_back(m.type);
    counts.push_back(static_cast<int>(m.offspring.size()));
  }
  Tree t = Tree::from_bfs(std::move(types), std::move(counts));
  for (std::size_t v = 0; v < t.size(); ++v)
    if (t.offspring(v) != marks[v].offspring)
      fail(ErrorCode::InvalidTree, "offspring of vertex " + std::to_string(v) + " disagree with the child types");
  return t;
}

double tree_prob(const GWModel& model, const Tree& t) {
  for (std::size_t v = 0; v < t.size(); ++v) {
    if (!model.alphabet.contains(t.type(v)))
      fail(ErrorCode::InvalidTree, "type index " + std::to_string(t.type(v)) + " is outside the alphabet");
    if (t.child_count(v) > model.cap)
      fail(ErrorCode::InvalidTree, "vertex " + std::to_string(v) + " has " + std::to_string(t.child_count(v)) +
                                       " children, cap is " + std::to_string(model.cap));
  }
  double p = model.root_law[static_cast<std::size_t>(t.type(0))];
  for (std::size_t v = 0; v < t.size() && p > 0.0; ++v) p *= model.kernel.prob(t.type(v), t.offspring(v));
  return p;
}

OffspringSampler::OffspringSampler(const GWModel& model) {
  const std::size_t k = model.types();
  cumulative_.resize(k);
  strings_.resize(k);
  for (std::size_t a = 0; a < k; ++a) {
    double acc = 0.0;
    for (const auto& atom : model.kernel.atoms(static_cast<TypeIndex>(a))) {
      acc += atom.p;
      cumulative_[a].push_back(acc);
      strings_[a].push_back(atom.children);
    }
    if (strings_[a].empty())
      fail(ErrorCode::InvalidParameter, "kernel row for " + model.alphabet.symbol(static_cast<TypeIndex>(a)) +
                                            " has no atoms");
  }
  double acc = 0.0;
  for (double p : model.root_law) {
    acc += p;
    root_cumulative_.push_back(acc);
  }
  if (acc <= 0.0) fail(ErrorCode::InvalidParameter, "root law has no mass");
}

namespace {

std::size_t pick(const std::vector<double>& cumulative, double u) {
  const double target = u * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  if (it == cumulative.end()) --it;
  return static_cast<std::size_t>(it - cumulative.begin());
}

}  // namespace

const OffspringString& OffspringSampler::draw(TypeIndex parent, Rng& rng) const {
  const auto a = static_cast<std::size_t>(parent);
  return strings_[a][pick(cumulative_[a], rng.uniform())];
}

TypeIndex OffspringSampler::draw_root(Rng& rng) const {
  std::size_t idx = pick(root_cumulative_, rng.uniform());
  // Skip zero-mass types that upper_bound can land on only through rounding.
  while (idx > 0 && root_cumulative_[idx] == root_cumulative_[idx - 1]) --idx;
  return static_cast<TypeIndex>(idx);
}

std::optional<Tree> sample_tree(const OffspringSampler& sampler, Rng& rng, std::size_t size_cap) {
  std::vector<TypeIndex> types{sampler.draw_root(rng)};
  std::vector<int> counts;
  for (std::size_t v = 0; v < types.size(); ++v) {
    const OffspringString& c = sampler.draw(types[v], rng);
    if (types.size() + c.size() > size_cap) return std::nullopt;
    types.insert(types.end(), c.begin(), c.end());
    counts.push_back(static_cast<int>(c.size()));
  }
  if (types.size() > size_cap) return std::nullopt;
  return Tree::from_bfs(std::move(types), std::move(counts));
}

std::optional<Tree> sample_tree(const GWModel& model, std::uint64_t seed, std::size_t size_cap) {
  OffspringSampler sampler(model);
  Rng rng(seed);
  return sample_tree(sampler, rng, size_cap);
}

std::vector<char> achievable_sizes(const GWModel& model, std::size_t n_max) {
  const std::size_t k = model.types();
  // reach[a][s]: a tree rooted at type a can have exactly s vertices.
  std::vector<std::vector<char>> reach(k, std::vector<char>(n_max + 1, 0));
  // partial[a][i][j][t]: the first j children of atom i can total t vertices.
  std::vector<std::vector<std::vector<std::vector<char>>>> partial(k);
  for (std::size_t a = 0; a < k; ++a) {
    const auto atoms = model.kernel.atoms(static_cast<TypeIndex>(a));
    partial[a].resize(atoms.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      partial[a][i].assign(atoms[i].children.size() + 1, std::vector<char>(n_max + 1, 0));
      partial[a][i][0][0] = 1;
    }
  }
  for (std::size_t s = 1; s <= n_max; ++s) {
    const std::size_t t = s - 1;
    for (std::size_t a = 0; a < k; ++a) {
      const auto atoms = model.kernel.atoms(static_cast<TypeIndex>(a));
      for (std::size_t i = 0; i < atoms.size(); ++i) {
        auto& table = partial[a][i];
        const auto& children = atoms[i].children;
        for (std::size_t j = 1; j <= children.size() && t > 0; ++j) {
          const auto& child = reach[static_cast<std::size_t>(children[j - 1])];
          char ok = 0;
          for (std::size_t u = 1; u <= t && !ok; ++u) ok = child[u] && table[j - 1][t - u];
          table[j][t] = ok;
        }
        if (table[children.size()][t]) reach[a][s] = 1;
      }
    }
  }
  std::vector<char> out(n_max + 1, 0);
  for (std::size_t a = 0; a < k; ++a) {
    if (model.root_law[a] <= 0.0) continue;
    for (std::size_t s = 0; s <= n_max; ++s) out[s] = out[s] || reach[a][s];
  }
  return out;
}

namespace {
// The size table is quadratic in n; past this bound the check is skipped and
// the rejection budget is the only guard.
constexpr std::size_t kSizeTableLimit = 4096;
}  // namespace

ConditionedSampler::ConditionedSampler(const GWModel& model, std::size_t n, std::uint64_t max_rejects)
    : sampler_(model), n_(n), max_rejects_(max_rejects) {
  if (n == 0) fail(ErrorCode::InvalidParameter, "conditioning size must be at least 1");
  if (max_rejects == 0) fail(ErrorCode::InvalidParameter, "max_rejects must be positive");
  if (n <= kSizeTableLimit && !achievable_sizes(model, n)[n])
    fail(ErrorCode::NoSuchSize, "no tree of size " + std::to_string(n) + " has positive probability");
}

Tree ConditionedSampler::draw(Rng& rng) {
  for (std::uint64_t rejects = 0;;) {
    ++attempts_;
    auto t = sample_tree(sampler_, rng, n_);
    if (t && t->size() == n_) {
      ++accepted_;
      return std::move(*t);
    }
    if (++rejects >= max_rejects_)
      fail(ErrorCode::ConditioningFailed, "no tree of size " + std::to_string(n_) + " after " +
                                              std::to_string(rejects) + " attempts; acceptance rate so far " +
                                              format_double(acceptance_rate()));
  }
}

Tree sample_conditioned(const GWModel& model, std::size_t n, std::uint64_t seed, std::uint64_t max_rejects) {
  ConditionedSampler sampler(model, n, max_rejects);
  Rng rng(seed);
  return sampler.draw(rng);
}

namespace {

struct Enumerator {
  const GWModel& model;
  std::size_t n;
  std::size_t budget;
  std::vector<TypeIndex> types;
  std::vector<int> counts;
  WeightedTreeList out;

  void visit(std::size_t v, double p) {
    if (v == types.size()) {
      if (types.size() != n) return;
      if (out.items.size() >= budget)
        fail(ErrorCode::CountExceeded, "more than " + std::to_string(budget) + " trees of size " + std::to_string(n));
      out.items.push_back({Tree::from_bfs(types, counts), p});
      return;
    }
    for (const auto& atom : model.kernel.atoms(types[v])) {
      if (types.size() + atom.children.size() > n) continue;
      types.insert(types.end(), atom.children.begin(), atom.children.end());
      counts.push_back(static_cast<int>(atom.children.size()));
      visit(v + 1, p * atom.p);
      counts.pop_back();
      types.resize(types.size() - atom.children.size());
    }
  }
};

}  // namespace

WeightedTreeList enumerate_trees(const GWModel& model, std::size_t n, std::size_t budget) {
  if (n == 0) fail(ErrorCode::InvalidParameter, "tree size must be at least 1");
  Enumerator e{model, n, budget, {}, {}, {}};
  for (std::size_t a = 0; a < model.types(); ++a) {
    if (model.root_law[a] <= 0.0) continue;
    e.types = {static_cast<TypeIndex>(a)};
    e.counts.clear();
    e.visit(0, model.root_law[a]);
  }
  std::sort(e.out.items.begin(), e.out.items.end(),
            [](const WeightedTree& l, const WeightedTree& r) { return l.tree < r.tree; });
  for (const auto& item : e.out.items) e.out.total += item.prob;
  return std::move(e.out);
}

std::string format_tree(const Alphabet& alphabet, const Tree& t) {
  std::string s = std::to_string(t.size());
  for (std::size_t v = 0; v < t.size(); ++v) {
    s += ' ';
    s += alphabet.symbol(t.type(v));
    s += ':';
    s += std::to_string(t.child_count(v));
  }
  return s;
}

namespace {

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r' || line[i] == '\n')) ++i;
    std::size_t j = i;
    while (j < line.size() && !(line[j] == ' ' || line[j] == '\t' || line[j] == '\r' || line[j] == '\n')) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_count(std::string_view s, long long& value) {
  auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace

Tree parse_tree(const Alphabet& alphabet, std::string_view line) {
  auto tok = tokens(line);
  if (tok.empty()) fail(ErrorCode::ParseError, "empty tree line");
  long long n = 0;
  if (!parse_count(tok[0], n) || n < 1) fail(ErrorCode::ParseError, "tree line must start with a positive size");
  if (tok.size() != static_cast<std::size_t>(n) + 1)
    fail(ErrorCode::ParseError, "tree line declares " + std::to_string(n) + " vertices but lists " +
                                    std::to_string(tok.size() - 1));
  std::vector<TypeIndex> types;
  std::vector<int> counts;
  for (std::size_t i = 1; i < tok.size(); ++i) {
    auto colon = tok[i].rfind(':');
    if (colon == std::string_view::npos)
      fail(ErrorCode::ParseError, "vertex token '" + std::string(tok[i]) + "' is not sym:count");
    long long c = 0;
    if (!parse_count(tok[i].substr(colon + 1), c) || c < 0)
      fail(ErrorCode::ParseError, "bad child count in '" + std::string(tok[i]) + "'");
    types.push_back(alphabet.index_of(tok[i].substr(0, colon)));
    counts.push_back(static_cast<int>(c));
  }
  return Tree::from_bfs(std::move(types), std::move(counts));
}

std::string format_mark(const Alphabet& alphabet, const VertexMark& mark) {
  std::string s = alphabet.symbol(mark.type);
  s += '|';
  const bool compact = alphabet.single_char();
  for (std::size_t i = 0; i < mark.offspring.size(); ++i) {
    if (!compact && i > 0) s += ',';
    s += alphabet.symbol(mark.offspring[i]);
  }
  return s;
}

VertexMark parse_mark(const Alphabet& alphabet, std::string_view text) {
  auto bar = text.find('|');
  if (bar == std::string_view::npos) fail(ErrorCode::ParseError, "mark '" + std::string(text) + "' has no '|'");
  VertexMark m;
  m.type = alphabet.index_of(trim(text.substr(0, bar)));
  std::string_view rest = trim(text.substr(bar + 1));
  if (rest.empty()) return m;
  if (alphabet.single_char()) {
    for (char ch : rest) m.offspring.push_back(alphabet.index_of(std::string_view(&ch, 1)));
  } else {
    for (const auto& part : split(rest, ',')) m.offspring.push_back(alphabet.index_of(trim(part)));
  }
  return m;
}

}  // namespace gwrdt
