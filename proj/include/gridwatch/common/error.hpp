#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace gridwatch {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input does not conform to a schema or violates a model invariant.
/// `where` names the offending field path or entity id.
class ValidationError : public Error {
 public:
  ValidationError(std::string where, const std::string& what)
      : Error(where.empty() ? what : where + ": " + what), where_(std::move(where)), message_(what) {}

  const std::string& where() const noexcept { return where_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::string where_;
  std::string message_;
};

/// A numerical routine failed (infeasible subproblem, singular system, stall).
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace gridwatch
