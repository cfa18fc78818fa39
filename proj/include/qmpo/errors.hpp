#pragma once

#include <stdexcept>
#include <string>

namespace qmpo {

/// Input matrix is numerically rank deficient where full rank is required.
class SingularMatrixError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Problem is degenerate (G = 0): the minimization collapses to a plain
/// symmetric eigenvalue problem and the solver refuses it by contract.
class DegenerateProblemError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A theorem hypothesis failed numerically; the dependent bound is not
/// certified rather than silently reported.
class AssumptionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operation called outside its state contract (e.g. extending a
/// terminated Lanczos process).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Matrix Market parse failure, carrying the 1-based line number.
class MtxParseError : public std::runtime_error {
public:
    MtxParseError(const std::string& what, long line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

}  // namespace qmpo
