#pragma once

#include <stdexcept>
#include <string>

namespace lowdim {

// Enumeration over model supports would exceed the configured budget.
// Exact methods refuse instead of silently falling back to sampling.
struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed configuration or input file. The CLI maps this to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lowdim
