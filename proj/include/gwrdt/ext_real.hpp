#pragma once

#include <compare>
#include <string>

namespace gwrdt {

/// Nonnegative-or-finite real extended with a tagged +infinity. Rate values
/// and exponents use this instead of IEEE inf so that reports, sorting and
/// comparisons stay total.
class ExtReal {
 public:
  constexpr ExtReal() = default;
  constexpr ExtReal(double v) : value_(v) {}  // NOLINT: implicit from finite

  static constexpr ExtReal infinity() {
    ExtReal r;
    r.infinite_ = true;
    return r;
  }

  constexpr bool is_inf() const { return infinite_; }
  constexpr bool is_finite() const { return !infinite_; }
  /// Finite value; meaningless for the sentinel.
  constexpr double value() const { return value_; }

  constexpr std::partial_ordering operator<=>(const ExtReal& o) const {
    if (infinite_ || o.infinite_) return infinite_ <=> o.infinite_;
    return value_ <=> o.value_;
  }
  constexpr bool operator==(const ExtReal& o) const {
    return infinite_ == o.infinite_ && (infinite_ || value_ == o.value_);
  }

  /// Shortest round-trip decimal, or "inf".
  std::string to_string() const;

 private:
  double value_ = 0.0;
  bool infinite_ = false;
};

}  // namespace gwrdt
