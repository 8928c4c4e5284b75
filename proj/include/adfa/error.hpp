#ifndef ADFA_ERROR_HPP_
#define ADFA_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace adfa {

// Root of the library's exception hierarchy.  The CLI maps each branch onto a
// process exit code (see exit_code_for in tools/adfa_cli.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad shapes, out-of-range ids, malformed configuration.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A structural requirement of the operation does not hold (e.g. a tree
// algorithm was handed a network with v-structures).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Input files that do not follow the documented formats.  Carries the line.
class ParseError : public InvalidArgument {
 public:
  ParseError(const std::string& what, std::size_t line)
      : InvalidArgument("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Numerically degenerate inputs: singular mixing matrices, zero-probability
// conditioning events, eigen-gaps too small to separate components.
class ConditioningError : public Error {
 public:
  using Error::Error;
};

// Problem exceeds the enumeration or search limits.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Violated internal invariant; indicates a bug rather than bad input.
class InternalError : public Error {
 public:
  using Error::Error;
};

// Rethrows the in-flight exception with `context` prefixed to its message,
// preserving its branch of the hierarchy.  Call only inside a catch block.
[[noreturn]] inline void rethrow_with_context(const std::string& context) {
  try {
    throw;
  } catch (const ParseError& e) {
    throw ParseError(context + ": " + e.what(), e.line());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(context + ": " + e.what());
  } catch (const PreconditionError& e) {
    throw PreconditionError(context + ": " + e.what());
  } catch (const ConditioningError& e) {
    throw ConditioningError(context + ": " + e.what());
  } catch (const CapacityError& e) {
    throw CapacityError(context + ": " + e.what());
  } catch (const InternalError& e) {
    throw InternalError(context + ": " + e.what());
  }
}

}  // namespace adfa

#endif  // ADFA_ERROR_HPP_
