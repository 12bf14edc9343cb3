#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cohere {

/// Invalid user-supplied parameters (grid, geometry, config file). CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input/output data (IDX, CINT, manifests, CSV). CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Byte-level parse failure with the offset at which decoding stopped.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::uint64_t offset)
      : DataError(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Non-finite values produced by a simulation step. CLI exit code 4.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A realization in an ensemble produced NaN/Inf.
class RealizationError : public NumericalError {
 public:
  explicit RealizationError(std::uint64_t realization)
      : NumericalError("non-finite samples in realization " + std::to_string(realization)),
        realization_(realization) {}
  std::uint64_t realization() const noexcept { return realization_; }

 private:
  std::uint64_t realization_;
};

/// Caller violated an operation precondition (e.g. mismatched grids).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace cohere
