#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mcpad::text {

[[nodiscard]] std::vector<std::string_view> split(std::string_view line, char sep);
[[nodiscard]] std::vector<std::string_view> lines(std::string_view text);
[[nodiscard]] std::string_view trim(std::string_view s) noexcept;

// Strict parsers: the whole field must be consumed; ArgumentError otherwise.
[[nodiscard]] double to_double(std::string_view s);
[[nodiscard]] std::int64_t to_int(std::string_view s);
[[nodiscard]] std::uint64_t to_uint(std::string_view s);

// Shortest round-trip decimal form ("inf"/"-inf"/"nan" for non-finite).
[[nodiscard]] std::string format_double(double v);
// Fixed-point with `digits` decimals.
[[nodiscard]] std::string format_fixed(double v, int digits);

}  // namespace mcpad::text
