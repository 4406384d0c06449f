#pragma once

#include <stdexcept>
#include <string>

namespace fastdiff {

/// Invalid configuration or parameters. `pointer` is a JSON pointer into the
/// offending config document when one applies.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what, std::string pointer = {})
      : std::runtime_error(pointer.empty() ? what : pointer + ": " + what),
        pointer_(std::move(pointer)) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

/// The retained band cannot certify a series to the requested tolerance.
class TruncationError : public ConfigError {
 public:
  TruncationError(const std::string& what, int suggested_K)
      : ConfigError(what), suggested_K_(suggested_K) {}
  int suggested_K() const { return suggested_K_; }

 private:
  int suggested_K_;
};

/// Non-finite state or a failed factorization.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, double time = 0.0)
      : std::runtime_error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

/// Every path of some sweep point stopped at the cutoff time.
class CutoffAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fastdiff
