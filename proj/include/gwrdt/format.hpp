#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gwrdt {

/// Shortest decimal that round-trips to the same double.
std::string format_double(double x);

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

/// 64-bit FNV-1a, hex encoded. Used for config digests in report headers.
std::string fnv1a_hex(std::string_view data);

}  // namespace gwrdt
