#pragma once

#include <stdexcept>
#include <string>

namespace bmf {

/// Bad input: malformed files, violated preconditions, missing labels.
/// The CLI maps this to exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure such as a diverging training run. Exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary file with the wrong magic or an unknown version.
class FormatError : public InputError {
 public:
  using InputError::InputError;
};

}  // namespace bmf
