#pragma once

#include <stdexcept>
#include <string>

namespace adaprelora {

/// Shape or dimension contract violated by a caller.
class dimension_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite value (NaN/Inf) where a finite one is required.
class invalid_value_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A Gram matrix was too ill-conditioned to invert exactly; the caller
/// should regularize (add eps*I) before retrying.
class singular_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Config-file problem; carries the 1-based offending line (0 = whole file).
class config_error : public std::runtime_error {
 public:
  config_error(std::string message, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + std::move(message)
                                    : std::move(message)),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace adaprelora
