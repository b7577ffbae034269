#pragma once

#include <string>
#include <string_view>

namespace pitransfer {

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double x);

/// Strict full-string parse; throws std::invalid_argument otherwise.
double parse_double(std::string_view text);

}  // namespace pitransfer
