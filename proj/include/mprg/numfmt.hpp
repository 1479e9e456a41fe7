#pragma once

#include <string>
#include <string_view>

namespace mprg {

// 17 significant digits; NaN is written as "nan".
std::string format_double(double value);

// Parses a full token as a double (accepts "nan"); throws IoError otherwise.
double parse_double(std::string_view token);

}  // namespace mprg
