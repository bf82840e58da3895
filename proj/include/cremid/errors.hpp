#pragma once

#include <stdexcept>
#include <string>

namespace cremid {

/// Bad user input: malformed files, invalid configuration, out-of-range
/// parameters. The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical failure inside the sampler (non-SPD matrix, all-zero
/// assignment probabilities, non-finite density). Exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cremid
