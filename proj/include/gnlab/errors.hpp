#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gnlab {

/// Shape or size mismatch between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition was violated by the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class UnsupportedOpError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed binary input. Carries the byte offset where parsing stopped.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Training produced a non-finite quantity.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::size_t step, const std::string& quantity)
      : std::runtime_error("non-finite " + quantity + " at generator step " + std::to_string(step)),
        step_(step),
        quantity_(quantity) {}
  std::size_t step() const noexcept { return step_; }
  const std::string& quantity() const noexcept { return quantity_; }

 private:
  std::size_t step_;
  std::string quantity_;
};

}  // namespace gnlab
