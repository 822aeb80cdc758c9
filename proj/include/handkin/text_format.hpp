#pragma once

#include <string>

namespace handkin {

// Significant digits used for every numeric text artifact.
inline constexpr int kTextDigits = 9;

// printf-style "%.<digits>g", with negative zero printed as "0".
std::string format_number(double value, int digits = kTextDigits);

}  // namespace handkin
