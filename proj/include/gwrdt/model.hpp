#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace gwrdt {

using TypeIndex = int;

/// Ordered children types of one vertex; length 0..cap.
using OffspringString = std::vector<TypeIndex>;

class Alphabet {
 public:
  Alphabet() = default;
  /// Throws InvalidParameter on an empty list or duplicate symbols.
  explicit Alphabet(std::vector<std::string> symbols);

  std::size_t size() const { return symbols_.size(); }
  const std::string& symbol(TypeIndex t) const { return symbols_.at(static_cast<std::size_t>(t)); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  bool contains(TypeIndex t) const { return t >= 0 && static_cast<std::size_t>(t) < symbols_.size(); }
  std::optional<TypeIndex> find(std::string_view symbol) const;
  /// Throws InvalidSymbol.
  TypeIndex index_of(std::string_view symbol) const;
  /// True when every symbol is one character, so offspring strings can be
  /// written without separators.
  bool single_char() const;

  bool operator==(const Alphabet&) const = default;

 private:
  std::vector<std::string> symbols_;
};

/// Number of occurrences of `a` in `c`. Throws InvalidSymbol if `a` or any
/// entry of `c` is outside the alphabet.
int multiplicity(const Alphabet& alphabet, TypeIndex a, const OffspringString& c);

inline int count_type(TypeIndex a, const OffspringString& c) {
  int m = 0;
  for (TypeIndex x : c) m += (x == a);
  return m;
}

struct KernelAtom {
  OffspringString children;
  double p = 0.0;
};

/// Offspring kernel K{c | parent}. Atoms per parent are kept sorted by the
/// offspring string and unique. Row sums are not enforced here; that is
/// validate_model's job.
class KernelTable {
 public:
  KernelTable() = default;
  /// Throws InvalidParameter on duplicate strings, out-of-range child types,
  /// or probabilities outside [0, 1]. Zero-probability atoms are dropped.
  KernelTable(std::size_t types, std::vector<std::vector<KernelAtom>> rows);

  std::size_t types() const { return rows_.size(); }
  std::span<const KernelAtom> atoms(TypeIndex parent) const { return rows_.at(static_cast<std::size_t>(parent)); }
  /// K{c | parent}, zero when c is not an atom.
  double prob(TypeIndex parent, const OffspringString& c) const;
  double row_sum(TypeIndex parent) const;
  std::size_t max_length() const;

 private:
  std::vector<std::vector<KernelAtom>> rows_;
};

/// A structurally well-formed multitype Galton-Watson specification. Semantic
/// checks (stochasticity, cap, criticality) are reported by validate_model.
struct GWModel {
  std::string name;
  Alphabet alphabet;
  std::vector<double> root_law;
  KernelTable kernel;
  int cap = 0;
  /// Parameter of a built-in preset (alpha for mtdna, p for chain-toy).
  std::optional<double> preset_param;

  std::size_t types() const { return alphabet.size(); }
};

/// Checks shapes only: root law length, kernel arity, cap >= 1.
GWModel make_model(std::string name, Alphabet alphabet, std::vector<double> root_law,
                   KernelTable kernel, int cap);

/// Mean offspring matrix: m(b, a) = expected number of type-a children of a
/// type-b parent.
Eigen::MatrixXd mean_matrix(const GWModel& model);
Eigen::MatrixXd mean_matrix(const KernelTable& kernel);

struct ValidationReport {
  struct RowSum {
    TypeIndex parent;
    double sum;
  };
  struct CapBreach {
    TypeIndex parent;
    std::size_t length;
  };

  double tolerance = 0.0;
  double root_law_sum = 0.0;
  bool root_law_ok = false;
  std::vector<RowSum> stochasticity_violations;
  std::vector<CapBreach> cap_violations;
  double perron_eigenvalue = 0.0;
  double perron_residual = 0.0;
  bool perron_converged = false;
  bool critical = false;
  std::vector<TypeIndex> root_support;
  std::vector<TypeIndex> reachable;
  std::vector<TypeIndex> stationary_support;
  bool weakly_irreducible = false;
  bool strongly_irreducible = false;

  /// Stochastic, within cap and critical. Irreducibility is reported, not
  /// required.
  bool passed() const;
  std::string to_text(const Alphabet& alphabet) const;
};

inline constexpr double kDefaultCriticalityTol = 1e-9;
inline constexpr double kStochasticityTol = 1e-12;

/// In strict mode a failing report raises StochasticityViolation,
/// CapViolation or CriticalityViolation (in that order of precedence).
ValidationReport validate_model(const GWModel& model, double tol = kDefaultCriticalityTol,
                                bool strict = false);

/// Two-type mitochondrial DNA model: 1 = normal, 0 = mutant. Each parent dies
/// childless with probability 1/2 or has two children whose types are drawn
/// independently (a normal child mutates with probability alpha; mutants
/// breed true). Root is a single normal ancestor.
GWModel mtdna_model(double alpha);

/// Two types; each parent has no children or two uniformly typed children,
/// each with probability 1/2. Root law uniform.
GWModel uniform_binary_model();

/// Cap-1 chain that alternates types: 0 -> (1), 1 -> (0).
GWModel alternating_model();

/// Cap-1 chain: 0 -> (0) w.p. p, (1) w.p. 1-p; 1 -> (0).
GWModel chain_toy_model(double p);

/// Resolves "mtdna", "uniform-binary", "alternating", "chain-toy". `param`
/// is alpha for mtdna and p for chain-toy. Throws InvalidParameter.
GWModel builtin_model(std::string_view name, double param);

/// JSON config: {"alphabet": [...], "root_law": {sym: p}, "cap": k,
///  "kernel": {parent: [{"children": [...], "p": x}, ...]}, "name": optional}.
/// Throws ParseError naming the line (syntax) or field path (schema), and
/// InvalidSymbol for symbols outside the alphabet.
GWModel model_from_json(std::string_view text);
GWModel load_model(const std::string& path);
std::string model_to_json(const GWModel& model);

}  // namespace gwrdt
