#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dagdiff {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Malformed IR access: child id out of range, wrong payload kind, symbol
// reference outside a forest, and similar contract violations.
class StructuralError : public Error {
  public:
    using Error::Error;
};

// Lexical or grammatical error in expression/program text. Positions are
// 1-based.
class SyntaxError : public Error {
  public:
    SyntaxError(const std::string& what, int line, int col)
        : Error(what + " at line " + std::to_string(line) + ", column " + std::to_string(col)),
          line_(line),
          col_(col) {}

    int line() const { return line_; }
    int col() const { return col_; }

  private:
    int line_;
    int col_;
};

// A variable had no value bound at evaluation time, or a name lookup failed.
class UnboundVariableError : public Error {
  public:
    explicit UnboundVariableError(const std::string& name)
        : Error("unbound variable '" + name + "'"), name_(name) {}

    const std::string& name() const { return name_; }

  private:
    std::string name_;
};

// Evaluation hit a point outside an operation's domain (ln of a
// non-positive value, sqrt of a negative value, division by zero).
class DomainError : public Error {
  public:
    DomainError(const std::string& op, double value)
        : Error("domain error: " + op + " applied to " + std::to_string(value)),
          op_(op),
          value_(value) {}

    const std::string& op() const { return op_; }
    double value() const { return value_; }

  private:
    std::string op_;
    double value_;
};

// A size- or work-limited operation (unfold, Copy-policy differentiation,
// memoize=off recursion) would exceed its budget. `estimated` carries the
// projected node/operation count (saturated if it overflowed).
class BudgetExceededError : public Error {
  public:
    explicit BudgetExceededError(std::uint64_t estimated, std::uint64_t budget)
        : Error("budget exceeded: needs " + std::to_string(estimated) +
                " nodes/operations, budget is " + std::to_string(budget)),
          estimated_(estimated),
          budget_(budget) {}

    std::uint64_t estimated() const { return estimated_; }
    std::uint64_t budget() const { return budget_; }

  private:
    std::uint64_t estimated_;
    std::uint64_t budget_;
};

// Program interpretation ran past its statement limit (runaway loop guard).
class StepLimitError : public Error {
  public:
    explicit StepLimitError(std::size_t limit)
        : Error("step limit of " + std::to_string(limit) + " interpreted statements exceeded") {}
};

}  // namespace dagdiff
