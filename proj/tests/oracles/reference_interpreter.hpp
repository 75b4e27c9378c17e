#pragma once

#include <optional>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

namespace oracle {

using BigInt = boost::multiprecision::cpp_int;

/// Shunting-yard evaluation in arbitrary precision. nullopt on any syntax
/// error or zero divisor. No range or length checks.
std::optional<BigInt> evaluate_exact(const std::string& s);

/// Applies the task filters (length <= 30, value in (-1000, 1000)).
std::optional<long long> evaluate_valid(const std::string& s);

}  // namespace oracle
