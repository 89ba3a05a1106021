#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace synco {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A SMILES string could not be turned into a molecular graph.
class ParseError : public Error {
 public:
  ParseError(const std::string &what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// A graph edit or a state transition violates the model's rules.
class InvalidOperation : public Error {
 public:
  using Error::Error;
};

/// A reaction cannot be represented as synthon completion in this model.
class UnrealizableReaction : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a persisted artifact failed.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// The forward-model service misbehaved. Never converted to a zero reward.
class OracleError : public Error {
 public:
  using Error::Error;
};

}  // namespace synco
