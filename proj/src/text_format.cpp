#include "handkin/text_format.hpp"

#include <cstdio>

namespace handkin {

std::string format_number(double value, int digits) {
  if (value == 0.0) value = 0.0;  // folds -0
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, value);
  return buf;
}

}  // namespace handkin
