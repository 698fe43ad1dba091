#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "gwrdt/error.hpp"
#include "gwrdt/ext_real.hpp"
#include "gwrdt/format.hpp"
#include "gwrdt/parallel.hpp"

namespace gwrdt {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidSymbol: return "InvalidSymbol";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::StochasticityViolation: return "StochasticityViolation";
    case ErrorCode::CriticalityViolation: return "CriticalityViolation";
    case ErrorCode::CapViolation: return "CapViolation";
    case ErrorCode::InvalidTree: return "InvalidTree";
    case ErrorCode::NoSuchSize: return "NoSuchSize";
    case ErrorCode::ConditioningFailed: return "ConditioningFailed";
    case ErrorCode::CountExceeded: return "CountExceeded";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::AlphabetMismatch: return "AlphabetMismatch";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DegenerateMatrix: return "DegenerateMatrix";
    case ErrorCode::NotCritical: return "NotCritical";
    case ErrorCode::OptFailed: return "OptFailed";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string ExtReal::to_string() const { return infinite_ ? "inf" : format_double(value_); }

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      break;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  static const char* digits = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = digits[h & 0xf];
    h >>= 4;
  }
  buf[16] = '\0';
  return buf;
}

unsigned default_threads() {
  if (const char* env = std::getenv("GWRDT_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = default_threads();
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr first_error;
  auto worker = [&] {
    while (true) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= count || first_error) return;
        i = next++;
      }
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace gwrdt
