#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace bsdiag {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (t <= 0, alpha <= 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Dimension mismatch or violated precondition on shapes.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Cholesky pivot <= 0.
class NotPositiveDefiniteError : public Error {
public:
    NotPositiveDefiniteError(const std::string& what, std::size_t pivot)
        : Error(what), pivot_(pivot) {}
    std::size_t pivot() const noexcept { return pivot_; }

private:
    std::size_t pivot_;
};

/// Rank-deficient or singular matrix; `column` is the offending column/pivot.
class SingularError : public Error {
public:
    SingularError(const std::string& what, std::size_t column)
        : Error(what), column_(column) {}
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t column_;
};

/// A function evaluated by a finite-difference probe returned a non-finite value.
class NonFiniteError : public Error {
public:
    NonFiniteError(const std::string& what, std::vector<double> point)
        : Error(what), point_(std::move(point)) {}
    const std::vector<double>& point() const noexcept { return point_; }

private:
    std::vector<double> point_;
};

/// Lexical or syntactic error in model text; `offset` is a byte offset into the text.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Domain violation while evaluating a mean function (log of a non-positive value, ...).
/// `offset` locates the offending node in the model text; `row` is set by build_design.
class EvaluationError : public Error {
public:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    EvaluationError(const std::string& what, std::size_t offset, std::size_t row = npos)
        : Error(compose(what, offset, row)), detail_(what), offset_(offset), row_(row) {}

    std::size_t offset() const noexcept { return offset_; }
    std::size_t row() const noexcept { return row_; }
    EvaluationError at_row(std::size_t row) const { return {detail_, offset_, row}; }

private:
    static std::string compose(const std::string& what, std::size_t offset, std::size_t row) {
        std::string msg = what + " at offset " + std::to_string(offset);
        if (row != npos) msg += " (row " + std::to_string(row + 1) + ")";
        return msg;
    }

    std::string detail_;
    std::size_t offset_;
    std::size_t row_;
};

/// An iterative procedure failed to converge; carries the best iterate found.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::vector<double> best)
        : Error(what), best_(std::move(best)) {}
    const std::vector<double>& best_iterate() const noexcept { return best_; }

private:
    std::vector<double> best_;
};

}  // namespace bsdiag
