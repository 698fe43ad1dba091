#include "gwrdt/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gwrdt/error.hpp"
#include "gwrdt/format.hpp"
#include "gwrdt/spectral.hpp"

namespace gwrdt {

using nlohmann::json;

Alphabet::Alphabet(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  if (symbols_.empty()) fail(ErrorCode::InvalidParameter, "alphabet is empty");
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i].empty()) fail(ErrorCode::InvalidParameter, "alphabet contains an empty symbol");
    for (std::size_t j = 0; j < i; ++j)
      if (symbols_[i] == symbols_[j]) fail(ErrorCode::InvalidParameter, "duplicate symbol '" + symbols_[i] + "'");
  }
}

std::optional<TypeIndex> Alphabet::find(std::string_view symbol) const {
  for (std::size_t i = 0; i < symbols_.size(); ++i)
    if (symbols_[i] == symbol) return static_cast<TypeIndex>(i);
  return std::nullopt;
}

TypeIndex Alphabet::index_of(std::string_view symbol) const {
  if (auto t = find(symbol)) return *t;
  fail(ErrorCode::InvalidSymbol, "unknown symbol '" + std::string(symbol) + "'");
}

bool Alphabet::single_char() const {
  return std::all_of(symbols_.begin(), symbols_.end(), [](const std::string& s) { return s.size() == 1; });
}

int multiplicity(const Alphabet& alphabet, TypeIndex a, const OffspringString& c) {
  if (!alphabet.contains(a)) fail(ErrorCode::InvalidSymbol, "type index " + std::to_string(a) + " not in alphabet");
  for (TypeIndex x : c)
    if (!alphabet.contains(x)) fail(ErrorCode::InvalidSymbol, "offspring type " + std::to_string(x) + " not in alphabet");
  return count_type(a, c);
}

// ---------------------------------------------------------------------------

KernelTable::KernelTable(std::size_t types, std::vector<std::vector<KernelAtom>> rows) {
  if (rows.size() != types)
    fail(ErrorCode::InvalidParameter, "kernel has " + std::to_string(rows.size()) + " parent rows, expected " +
                                          std::to_string(types));
  rows_.resize(types);
  for (std::size_t b = 0; b < types; ++b) {
    for (auto& atom : rows[b]) {
      if (!std::isfinite(atom.p) || atom.p < 0.0 || atom.p > 1.0)
        fail(ErrorCode::InvalidParameter, "kernel probability " + format_double(atom.p) + " outside [0,1]");
      for (TypeIndex x : atom.children)
        if (x < 0 || static_cast<std::size_t>(x) >= types)
          fail(ErrorCode::InvalidSymbol, "offspring type " + std::to_string(x) + " not in alphabet");
      if (atom.p > 0.0) rows_[b].push_back(std::move(atom));
    }
    auto& row = rows_[b];
    std::sort(row.begin(), row.end(), [](const KernelAtom& l, const KernelAtom& r) { return l.children < r.children; });
    for (std::size_t i = 1; i < row.size(); ++i)
      if (row[i].children == row[i - 1].children)
        fail(ErrorCode::InvalidParameter, "duplicate offspring string for parent " + std::to_string(b));
  }
}

double KernelTable::prob(TypeIndex parent, const OffspringString& c) const {
  if (parent < 0 || static_cast<std::size_t>(parent) >= rows_.size()) return 0.0;
  const auto& row = rows_[static_cast<std::size_t>(parent)];
  auto it = std::lower_bound(row.begin(), row.end(), c,
                             [](const KernelAtom& a, const OffspringString& key) { return a.children < key; });
  return (it != row.end() && it->children == c) ? it->p : 0.0;
}

double KernelTable::row_sum(TypeIndex parent) const {
  double s = 0.0;
  for (const auto& a : atoms(parent)) s += a.p;
  return s;
}

std::size_t KernelTable::max_length() const {
  std::size_t m = 0;
  for (const auto& row : rows_)
    for (const auto& a : row) m = std::max(m, a.children.size());
  return m;
}

GWModel make_model(std::string name, Alphabet alphabet, std::vector<double> root_law, KernelTable kernel, int cap) {
  if (root_law.size() != alphabet.size())
    fail(ErrorCode::InvalidParameter, "root law has " + std::to_string(root_law.size()) + " entries for " +
                                          std::to_string(alphabet.size()) + " types");
  for (double p : root_law)
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) fail(ErrorCode::InvalidParameter, "root law entry outside [0,1]");
  if (kernel.types() != alphabet.size()) fail(ErrorCode::InvalidParameter, "kernel arity does not match alphabet");
  if (cap < 1) fail(ErrorCode::InvalidParameter, "offspring cap must be a positive integer");
  GWModel m;
  m.name = std::move(name);
  m.alphabet = std::move(alphabet);
  m.root_law = std::move(root_law);
  m.kernel = std::move(kernel);
  m.cap = cap;
  return m;
}

Eigen::MatrixXd mean_matrix(const KernelTable& kernel) {
  const auto k = static_cast<Eigen::Index>(kernel.types());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index b = 0; b < k; ++b)
    for (const auto& atom : kernel.atoms(static_cast<TypeIndex>(b)))
      for (TypeIndex a : atom.children) m(b, a) += atom.p;
  return m;
}

Eigen::MatrixXd mean_matrix(const GWModel& model) { return mean_matrix(model.kernel); }

// ---------------------------------------------------------------------------
// Validation

namespace {

std::vector<TypeIndex> reachable_from(const Eigen::MatrixXd& mean, const std::vector<TypeIndex>& sources) {
  const auto k = mean.rows();
  std::vector<char> seen(static_cast<std::size_t>(k), 0);
  std::vector<TypeIndex> stack = sources;
  for (auto s : sources) seen[static_cast<std::size_t>(s)] = 1;
  while (!stack.empty()) {
    TypeIndex b = stack.back();
    stack.pop_back();
    for (Eigen::Index a = 0; a < k; ++a) {
      if (mean(b, a) > 0.0 && !seen[static_cast<std::size_t>(a)]) {
        seen[static_cast<std::size_t>(a)] = 1;
        stack.push_back(static_cast<TypeIndex>(a));
      }
    }
  }
  std::vector<TypeIndex> out;
  for (Eigen::Index a = 0; a < k; ++a)
    if (seen[static_cast<std::size_t>(a)]) out.push_back(static_cast<TypeIndex>(a));
  return out;
}

std::string join_types(const Alphabet& alphabet, const std::vector<TypeIndex>& ts) {
  std::string s = "{";
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (i) s += " ";
    s += alphabet.symbol(ts[i]);
  }
  return s + "}";
}

}  // namespace

bool ValidationReport::passed() const {
  return root_law_ok && stochasticity_violations.empty() && cap_violations.empty() && critical;
}

std::string ValidationReport::to_text(const Alphabet& alphabet) const {
  std::ostringstream os;
  os << "root_law_sum," << format_double(root_law_sum) << "\n";
  os << "root_law_ok," << (root_law_ok ? "yes" : "no") << "\n";
  for (const auto& v : stochasticity_violations)
    os << "stochasticity_violation,parent=" << alphabet.symbol(v.parent) << " sum=" << format_double(v.sum) << "\n";
  for (const auto& v : cap_violations)
    os << "cap_violation,parent=" << alphabet.symbol(v.parent) << " length=" << v.length << "\n";
  os << "stochastic," << (stochasticity_violations.empty() && root_law_ok ? "yes" : "no") << "\n";
  os << "perron_eigenvalue," << format_double(perron_eigenvalue) << "\n";
  os << "perron_residual," << format_double(perron_residual) << "\n";
  os << "perron_converged," << (perron_converged ? "yes" : "no") << "\n";
  os << "criticality_tolerance," << format_double(tolerance) << "\n";
  os << "critical," << (critical ? "yes" : "no") << "\n";
  os << "root_support," << join_types(alphabet, root_support) << "\n";
  os << "reachable," << join_types(alphabet, reachable) << "\n";
  os << "stationary_support," << join_types(alphabet, stationary_support) << "\n";
  os << "weakly_irreducible," << (weakly_irreducible ? "yes" : "no") << "\n";
  os << "strongly_irreducible," << (strongly_irreducible ? "yes" : "no") << "\n";
  os << "passed," << (passed() ? "yes" : "no") << "\n";
  return os.str();
}

ValidationReport validate_model(const GWModel& model, double tol, bool strict) {
  ValidationReport r;
  r.tolerance = tol;
  const auto k = model.types();
  for (double p : model.root_law) r.root_law_sum += p;
  r.root_law_ok = std::abs(r.root_law_sum - 1.0) <= kStochasticityTol;
  for (std::size_t b = 0; b < k; ++b) {
    const auto parent = static_cast<TypeIndex>(b);
    double s = model.kernel.row_sum(parent);
    if (std::abs(s - 1.0) > kStochasticityTol) r.stochasticity_violations.push_back({parent, s});
    for (const auto& atom : model.kernel.atoms(parent))
      if (atom.children.size() > static_cast<std::size_t>(model.cap))
        r.cap_violations.push_back({parent, atom.children.size()});
  }

  const Eigen::MatrixXd mean = mean_matrix(model);
  Eigen::VectorXd stationary;
  try {
    PerronData pd = perron(mean, Orientation::Left);
    r.perron_eigenvalue = pd.eigenvalue;
    r.perron_residual = pd.residual;
    r.perron_converged = true;
    stationary = pd.pi;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DegenerateMatrix) {
      r.perron_eigenvalue = 0.0;
      r.perron_converged = true;
    }
    // NoConvergence leaves perron_converged false; criticality then fails.
  }
  r.critical = r.perron_converged && std::abs(r.perron_eigenvalue - 1.0) <= tol;

  for (std::size_t a = 0; a < k; ++a)
    if (model.root_law[a] > 0.0) r.root_support.push_back(static_cast<TypeIndex>(a));
  r.reachable = reachable_from(mean, r.root_support);
  if (stationary.size() == static_cast<Eigen::Index>(k)) {
    for (std::size_t a = 0; a < k; ++a)
      if (stationary(static_cast<Eigen::Index>(a)) > 1e-12) r.stationary_support.push_back(static_cast<TypeIndex>(a));
  } else {
    for (std::size_t a = 0; a < k; ++a) r.stationary_support.push_back(static_cast<TypeIndex>(a));
  }
  r.weakly_irreducible = !r.stationary_support.empty() &&
                         std::all_of(r.stationary_support.begin(), r.stationary_support.end(), [&](TypeIndex a) {
                           return std::find(r.reachable.begin(), r.reachable.end(), a) != r.reachable.end();
                         });
  r.strongly_irreducible = true;
  for (std::size_t a = 0; a < k && r.strongly_irreducible; ++a)
    r.strongly_irreducible = reachable_from(mean, {static_cast<TypeIndex>(a)}).size() == k &&
                             // a type must reach itself through at least one edge
                             (k > 1 || mean(0, 0) > 0.0);

  if (strict) {
    if (!r.root_law_ok)
      fail(ErrorCode::StochasticityViolation, "root law sums to " + format_double(r.root_law_sum));
    if (!r.stochasticity_violations.empty()) {
      const auto& v = r.stochasticity_violations.front();
      fail(ErrorCode::StochasticityViolation, "kernel row for parent '" + model.alphabet.symbol(v.parent) +
                                                  "' sums to " + format_double(v.sum));
    }
    if (!r.cap_violations.empty())
      fail(ErrorCode::CapViolation, "offspring string of length " + std::to_string(r.cap_violations.front().length) +
                                        " exceeds cap " + std::to_string(model.cap));
    if (!r.critical)
      fail(ErrorCode::CriticalityViolation, "mean-matrix Perron eigenvalue " + format_double(r.perron_eigenvalue) +
                                                " is not within " + format_double(tol) + " of 1");
  }
  return r;
}

// ---------------------------------------------------------------------------
// Built-in models

GWModel mtdna_model(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorCode::InvalidParameter, "alpha must lie in [0,1]");
  // Single-child type law K_alpha{. | parent}: index = child type.
  const double from_normal[2] = {alpha, 1.0 - alpha};
  const double from_mutant[2] = {1.0, 0.0};
  std::vector<std::vector<KernelAtom>> rows(2);
  for (int parent = 0; parent < 2; ++parent) {
    const double* law = parent == 1 ? from_normal : from_mutant;
    rows[static_cast<std::size_t>(parent)].push_back({{}, 0.5});
    for (int a1 = 0; a1 < 2; ++a1)
      for (int a2 = 0; a2 < 2; ++a2)
        rows[static_cast<std::size_t>(parent)].push_back({{a1, a2}, 0.5 * law[a1] * law[a2]});
  }
  auto m = make_model("mtdna", Alphabet({"0", "1"}), {0.0, 1.0}, KernelTable(2, std::move(rows)), 2);
  m.preset_param = alpha;
  return m;
}

GWModel uniform_binary_model() {
  std::vector<std::vector<KernelAtom>> rows(2);
  for (auto& row : rows) {
    row.push_back({{}, 0.5});
    for (int a1 = 0; a1 < 2; ++a1)
      for (int a2 = 0; a2 < 2; ++a2) row.push_back({{a1, a2}, 0.125});
  }
  return make_model("uniform-binary", Alphabet({"0", "1"}), {0.5, 0.5}, KernelTable(2, std::move(rows)), 2);
}

GWModel alternating_model() {
  std::vector<std::vector<KernelAtom>> rows(2);
  rows[0].push_back({{1}, 1.0});
  rows[1].push_back({{0}, 1.0});
  return make_model("alternating", Alphabet({"0", "1"}), {1.0, 0.0}, KernelTable(2, std::move(rows)), 1);
}

GWModel chain_toy_model(double p) {
  if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::InvalidParameter, "p must lie in [0,1]");
  std::vector<std::vector<KernelAtom>> rows(2);
  rows[0].push_back({{0}, p});
  rows[0].push_back({{1}, 1.0 - p});
  rows[1].push_back({{0}, 1.0});
  auto m = make_model("chain-toy", Alphabet({"0", "1"}), {1.0, 0.0}, KernelTable(2, std::move(rows)), 1);
  m.preset_param = p;
  return m;
}

GWModel builtin_model(std::string_view name, double param) {
  if (name == "mtdna") return mtdna_model(param);
  if (name == "uniform-binary") return uniform_binary_model();
  if (name == "alternating") return alternating_model();
  if (name == "chain-toy") return chain_toy_model(param);
  fail(ErrorCode::InvalidParameter, "unknown built-in model '" + std::string(name) +
                                        "' (expected mtdna, uniform-binary, alternating, chain-toy)");
}

// ---------------------------------------------------------------------------
// JSON config

namespace {

[[noreturn]] void schema_error(const std::string& field, const std::string& what) {
  fail(ErrorCode::ParseError, "field '" + field + "': " + what);
}

double number_field(const json& j, const std::string& field) {
  if (!j.is_number()) schema_error(field, "expected a number");
  return j.get<double>();
}

std::size_t line_of(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) line += (text[i] == '\n');
  return line;
}

}  // namespace

GWModel model_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ParseError, "line " + std::to_string(line_of(text, e.byte)) + ": " + e.what());
  }
  if (!j.is_object()) schema_error("<root>", "expected an object");

  if (!j.contains("alphabet") || !j["alphabet"].is_array()) schema_error("alphabet", "expected an array of symbols");
  std::vector<std::string> symbols;
  for (std::size_t i = 0; i < j["alphabet"].size(); ++i) {
    const auto& s = j["alphabet"][i];
    if (!s.is_string()) schema_error("alphabet[" + std::to_string(i) + "]", "expected a string");
    symbols.push_back(s.get<std::string>());
  }
  Alphabet alphabet;
  try {
    alphabet = Alphabet(symbols);
  } catch (const Error& e) {
    schema_error("alphabet", e.what());
  }
  auto symbol_index = [&](const json& s, const std::string& field) -> TypeIndex {
    if (!s.is_string()) schema_error(field, "expected a symbol string");
    auto t = alphabet.find(s.get<std::string>());
    if (!t) fail(ErrorCode::InvalidSymbol, "field '" + field + "': unknown symbol '" + s.get<std::string>() + "'");
    return *t;
  };

  if (!j.contains("cap")) schema_error("cap", "missing");
  if (!j["cap"].is_number_integer() || j["cap"].get<long long>() < 1) schema_error("cap", "expected a positive integer");
  const int cap = static_cast<int>(j["cap"].get<long long>());

  std::vector<double> root(alphabet.size(), 0.0);
  if (!j.contains("root_law") || !j["root_law"].is_object()) schema_error("root_law", "expected an object {symbol: p}");
  for (auto it = j["root_law"].begin(); it != j["root_law"].end(); ++it) {
    const std::string field = "root_law." + it.key();
    auto t = alphabet.find(it.key());
    if (!t) fail(ErrorCode::InvalidSymbol, "field '" + field + "': unknown symbol '" + it.key() + "'");
    double p = number_field(it.value(), field);
    if (!(p >= 0.0 && p <= 1.0)) schema_error(field, "probability outside [0,1]");
    root[static_cast<std::size_t>(*t)] = p;
  }

  if (!j.contains("kernel") || !j["kernel"].is_object()) schema_error("kernel", "expected an object {parent: [...]}");
  std::vector<std::vector<KernelAtom>> rows(alphabet.size());
  for (auto it = j["kernel"].begin(); it != j["kernel"].end(); ++it) {
    const std::string pfield = "kernel." + it.key();
    auto parent = alphabet.find(it.key());
    if (!parent) fail(ErrorCode::InvalidSymbol, "field '" + pfield + "': unknown parent symbol '" + it.key() + "'");
    if (!it.value().is_array()) schema_error(pfield, "expected an array of {children, p}");
    for (std::size_t i = 0; i < it.value().size(); ++i) {
      const auto& entry = it.value()[i];
      const std::string efield = pfield + "[" + std::to_string(i) + "]";
      if (!entry.is_object()) schema_error(efield, "expected an object");
      if (!entry.contains("children") || !entry["children"].is_array()) schema_error(efield + ".children", "expected an array");
      if (!entry.contains("p")) schema_error(efield + ".p", "missing");
      KernelAtom atom;
      for (std::size_t c = 0; c < entry["children"].size(); ++c)
        atom.children.push_back(symbol_index(entry["children"][c], efield + ".children[" + std::to_string(c) + "]"));
      atom.p = number_field(entry["p"], efield + ".p");
      if (!(atom.p >= 0.0 && atom.p <= 1.0)) schema_error(efield + ".p", "probability outside [0,1]");
      rows[static_cast<std::size_t>(*parent)].push_back(std::move(atom));
    }
  }
  std::string name = "config";
  if (j.contains("name")) {
    if (!j["name"].is_string()) schema_error("name", "expected a string");
    name = j["name"].get<std::string>();
  }
  try {
    return make_model(name, alphabet, root, KernelTable(alphabet.size(), std::move(rows)), cap);
  } catch (const Error& e) {
    schema_error("kernel", e.what());
  }
}

GWModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open model config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return model_from_json(ss.str());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) fail(ErrorCode::ParseError, path + ": " + e.what());
    throw;
  }
}

std::string model_to_json(const GWModel& model) {
  json j;
  j["name"] = model.name;
  j["alphabet"] = model.alphabet.symbols();
  j["cap"] = model.cap;
  json root = json::object();
  for (std::size_t a = 0; a < model.types(); ++a)
    if (model.root_law[a] > 0.0) root[model.alphabet.symbol(static_cast<TypeIndex>(a))] = model.root_law[a];
  j["root_law"] = root;
  json kernel = json::object();
  for (std::size_t b = 0; b < model.types(); ++b) {
    json row = json::array();
    for (const auto& atom : model.kernel.atoms(static_cast<TypeIndex>(b))) {
      json children = json::array();
      for (TypeIndex c : atom.children) children.push_back(model.alphabet.symbol(c));
      row.push_back({{"children", children}, {"p", atom.p}});
    }
    kernel[model.alphabet.symbol(static_cast<TypeIndex>(b))] = row;
  }
  j["kernel"] = kernel;
  return j.dump(2);
}

}  // namespace gwrdt
