#pragma once

#include <stdexcept>
#include <string>

namespace ikseed {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (model, scenario, seed file, CLI pose argument).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a model or scenario invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Binary file problems: I/O failure, bad magic, unsupported version.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// No gene in the initial population could reach every goal.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

}  // namespace ikseed
