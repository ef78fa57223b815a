#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace blended {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed program text. `position` is a byte offset into the input.
class ParseError : public Error {
 public:
  enum class Kind { Syntax, UnknownSymbol, ArityMismatch, TypeMismatch };

  ParseError(Kind kind, std::size_t position, const std::string& what)
      : Error(what + " (at offset " + std::to_string(position) + ")"),
        kind_(kind),
        position_(position) {}

  Kind kind() const { return kind_; }
  std::size_t position() const { return position_; }

 private:
  Kind kind_;
  std::size_t position_;
};

// Raised by concrete execution: holes, unbound variables, runtime faults.
class EvalError : public Error {
 public:
  using Error::Error;
};

// Grammar, registry or run configuration that cannot work.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  NonFiniteError(int node, const std::string& what)
      : Error(what + " (node " + std::to_string(node) + ")"), node_(node) {}
  int node() const { return node_; }

 private:
  int node_;
};

}  // namespace blended
