#pragma once

#include <string>
#include <string_view>

namespace genpred {

// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);
// Strict parse of a full string as a double; throws InputError otherwise.
double parse_double(std::string_view text);

}  // namespace genpred
