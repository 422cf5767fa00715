#pragma once

#include <stdexcept>
#include <string>

namespace apnn {

// Bad configuration or malformed input files; the CLI maps this to exit 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure (non-finite risk, solver non-convergence); exit 2.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace apnn
