#pragma once

#include <stdexcept>
#include <string>

namespace adastrat {

// Raised when an otherwise valid computation degenerates numerically
// (rank-deficient gradient step, all within-stratum deviations zero, ...).
// Callers typically catch it and fall back to a safe default.
class degenerate_error : public std::runtime_error {
 public:
  explicit degenerate_error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid experiment configuration; carries the offending field path.
class config_error : public std::invalid_argument {
 public:
  config_error(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace adastrat
