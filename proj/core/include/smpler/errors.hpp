#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace smpler {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree with the operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf appeared in an input or was produced by an operation.
class NumericDomainError : public Error {
 public:
  using Error::Error;
};

/// Input sits on a singular configuration (zero vector, colinear points, ...).
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

/// A stored object violates one of its documented invariants.
class InvariantError : public Error {
 public:
  InvariantError(std::string invariant, const std::string& detail)
      : Error("invariant violated: " + invariant + (detail.empty() ? "" : " (" + detail + ")")),
        invariant_(std::move(invariant)) {}
  const std::string& invariant() const noexcept { return invariant_; }

 private:
  std::string invariant_;
};

/// Malformed container or text input.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : Error("parse error at byte " + std::to_string(byte_offset) + ": " + what),
        offset_(byte_offset) {}
  std::size_t byte_offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Tensor allocations exceeded the memory budget of the current thread.
class MemoryBudgetError : public Error {
 public:
  MemoryBudgetError(std::size_t requested, std::size_t budget)
      : Error("memory budget exceeded: requested live bytes " + std::to_string(requested) +
              " > budget " + std::to_string(budget)),
        requested_(requested),
        budget_(budget) {}
  std::size_t requested() const noexcept { return requested_; }
  std::size_t budget() const noexcept { return budget_; }

 private:
  std::size_t requested_;
  std::size_t budget_;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(std::size_t step)
      : Error("training diverged at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Scaling fit requested with too few or too narrowly spread sweep points.
class InsufficientPointsError : public Error {
 public:
  using Error::Error;
};

}  // namespace smpler
