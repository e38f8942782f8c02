#pragma once

#include <string>
#include <string_view>

namespace towerlab {

// Locale-independent rendering with 17 significant digits;
// parse_double(format_double(x)) == x for every finite x.
std::string format_double(double value);
double parse_double(std::string_view text);

}  // namespace towerlab
