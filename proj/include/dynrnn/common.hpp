#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace dynrnn {

// Error taxonomy mirrors the CLI exit codes: config/usage errors exit 1,
// data/schema errors exit 2, numeric divergence exits 3.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 17 significant digits round-trips any IEEE-754 double exactly through
// strtod; all CSV and config output goes through this.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace dynrnn
