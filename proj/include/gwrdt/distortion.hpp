#pragma once

#include <map>
#include <string>
#include <string_view>

#include "gwrdt/empirical.hpp"
#include "gwrdt/model.hpp"
#include "gwrdt/trees.hpp"

namespace gwrdt {

/// Bounded single-letter distortion on mark pairs.
class Distortion {
 public:
  enum class Kind { Zero, TypeHamming, MarkHamming, Table };

  static Distortion zero();
  /// 1 if the two types differ.
  static Distortion type_hamming();
  /// Type mismatch plus the number of differing child slots (an absent child
  /// counts as its own symbol) divided by the cap. Bounded by 2.
  static Distortion mark_hamming(int cap);
  /// Explicit values; unlisted pairs take `fallback`. Values must be finite
  /// and nonnegative (InvalidParameter).
  static Distortion table(std::map<MarkPair, double> values, double fallback, std::string name = "table");

  double operator()(const VertexMark& x, const VertexMark& y) const;
  /// Upper bound of the values taken.
  double bound() const { return bound_; }
  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }

 private:
  Kind kind_ = Kind::Zero;
  int cap_ = 1;
  double fallback_ = 0.0;
  double bound_ = 0.0;
  std::map<MarkPair, double> values_;
  std::string name_ = "zero";
};

/// "type-hamming", "mark-hamming" (needs the cap) or "zero".
Distortion builtin_distortion(std::string_view name, int cap);

/// CSV rows "mark_x,mark_y,value" with marks as "type|c1c2..."; a row
/// "*,*,value" sets the value of unlisted pairs (default 0). Lines starting
/// with '#' are ignored.
Distortion parse_distortion_table(std::string_view text, const Alphabet& ax, const Alphabet& ay);
Distortion load_distortion_table(const std::string& path, const Alphabet& ax, const Alphabet& ay);

/// rho^(n)(x, y) = (1/n) sum_v rho(mark_x(v), mark_y(v)). Throws SizeMismatch.
double tree_distortion(const Distortion& rho, const Tree& x, const Tree& y);

/// <rho, mu> in either view.
double expectation(const Distortion& rho, const PairMeasure& mu);

}  // namespace gwrdt
