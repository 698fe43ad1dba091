#include "gwrdt/distortion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gwrdt/error.hpp"
#include "gwrdt/format.hpp"

namespace gwrdt {

Distortion Distortion::zero() { return Distortion{}; }

Distortion Distortion::type_hamming() {
  Distortion d;
  d.kind_ = Kind::TypeHamming;
  d.bound_ = 1.0;
  d.name_ = "type-hamming";
  return d;
}

Distortion Distortion::mark_hamming(int cap) {
  if (cap < 1) fail(ErrorCode::InvalidParameter, "mark-hamming needs cap >= 1");
  Distortion d;
  d.kind_ = Kind::MarkHamming;
  d.cap_ = cap;
  d.bound_ = 2.0;
  d.name_ = "mark-hamming";
  return d;
}

Distortion Distortion::table(std::map<MarkPair, double> values, double fallback, std::string name) {
  auto check = [](double v) {
    if (!std::isfinite(v) || v < 0.0)
      fail(ErrorCode::InvalidParameter, "distortion values must be finite and nonnegative, got " + format_double(v));
  };
  check(fallback);
  Distortion d;
  d.kind_ = Kind::Table;
  d.fallback_ = fallback;
  d.bound_ = fallback;
  for (const auto& [k, v] : values) {
    check(v);
    d.bound_ = std::max(d.bound_, v);
  }
  d.values_ = std::move(values);
  d.name_ = std::move(name);
  return d;
}

double Distortion::operator()(const VertexMark& x, const VertexMark& y) const {
  switch (kind_) {
    case Kind::Zero: return 0.0;
    case Kind::TypeHamming: return x.type != y.type ? 1.0 : 0.0;
    case Kind::MarkHamming: {
      int diff = 0;
      for (std::size_t i = 0; i < static_cast<std::size_t>(cap_); ++i) {
        const bool hx = i < x.offspring.size();
        const bool hy = i < y.offspring.size();
        if (hx != hy || (hx && x.offspring[i] != y.offspring[i])) ++diff;
      }
      return (x.type != y.type ? 1.0 : 0.0) + static_cast<double>(diff) / static_cast<double>(cap_);
    }
    case Kind::Table: {
      auto it = values_.find({x, y});
      return it == values_.end() ? fallback_ : it->second;
    }
  }
  return 0.0;
}

Distortion builtin_distortion(std::string_view name, int cap) {
  if (name == "type-hamming") return Distortion::type_hamming();
  if (name == "mark-hamming") return Distortion::mark_hamming(cap);
  if (name == "zero") return Distortion::zero();
  fail(ErrorCode::InvalidParameter, "unknown distortion '" + std::string(name) +
                                        "' (expected type-hamming, mark-hamming, zero or a table file)");
}

namespace {

std::vector<std::string> csv_fields(std::string_view line, std::size_t lineno) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  if (quoted) fail(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": unterminated quote");
  return out;
}

double parse_value(std::string_view s, std::size_t lineno) {
  s = trim(s);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    fail(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": '" + std::string(s) + "' is not a number");
  return v;
}

}  // namespace

Distortion parse_distortion_table(std::string_view text, const Alphabet& ax, const Alphabet& ay) {
  std::map<MarkPair, double> values;
  double fallback = 0.0;
  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim(text.substr(start, end - start));
    start = end + 1;
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    auto f = csv_fields(line, lineno);
    if (f.size() != 3)
      fail(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": expected mark_x,mark_y,value");
    const auto fx = std::string(trim(f[0]));
    const auto fy = std::string(trim(f[1]));
    if (fx == "mark_x" && fy == "mark_y") continue;
    const double v = parse_value(f[2], lineno);
    if (fx == "*" && fy == "*") {
      fallback = v;
      continue;
    }
    MarkPair key;
    try {
      key = {parse_mark(ax, fx), parse_mark(ay, fy)};
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(lineno) + ": " + e.detail());
    }
    if (!values.emplace(std::move(key), v).second)
      fail(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": duplicate pair");
  }
  return Distortion::table(std::move(values), fallback);
}

Distortion load_distortion_table(const std::string& path, const Alphabet& ax, const Alphabet& ay) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open distortion table '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_distortion_table(ss.str(), ax, ay);
}

double tree_distortion(const Distortion& rho, const Tree& x, const Tree& y) {
  if (x.size() != y.size())
    fail(ErrorCode::SizeMismatch, "trees have " + std::to_string(x.size()) + " and " + std::to_string(y.size()) +
                                      " vertices");
  double s = 0.0;
  for (std::size_t v = 0; v < x.size(); ++v) s += rho({x.type(v), x.offspring(v)}, {y.type(v), y.offspring(v)});
  return s / static_cast<double>(x.size());
}

double expectation(const Distortion& rho, const PairMeasure& mu) {
  double s = 0.0;
  if (mu.view() == MeasureView::MarkedPair) {
    for (const auto& [k, w] : mu.marked()) s += w * rho(k.x, k.y);
  } else {
    for (const auto& [k, w] : mu.paired()) {
      const MarkPair m = to_marked(k);
      s += w * rho(m.x, m.y);
    }
  }
  return s;
}

}  // namespace gwrdt
