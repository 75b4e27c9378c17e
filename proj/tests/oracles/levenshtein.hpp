#pragma once

#include <cstddef>
#include <string>

namespace oracle {

std::size_t levenshtein(const std::string& a, const std::string& b);

}  // namespace oracle
