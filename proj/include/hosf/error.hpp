#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace hosf {

/// Base of every error raised by the library.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Bad input: wrong shapes, out-of-range parameters, malformed files.
class ValidationError : public Error
{
  public:
    using Error::Error;
};

class ShapeError : public ValidationError
{
  public:
    using ValidationError::ValidationError;
};

class SizeLimitError : public ValidationError
{
  public:
    using ValidationError::ValidationError;
};

class UnsupportedError : public ValidationError
{
  public:
    using ValidationError::ValidationError;
};

class FormatError : public ValidationError
{
  public:
    using ValidationError::ValidationError;
};

/// Numerical failure: degenerate points, breakdowns, rank deficiency.
class NumericError : public Error
{
  public:
    using Error::Error;
};

/// Raised where p(x) underflows below the degeneracy floor.
class DegeneratePointError : public NumericError
{
  public:
    explicit DegeneratePointError(std::string const& what,
                                  std::optional<std::size_t> row = std::nullopt)
        : NumericError(row ? what + " (row " + std::to_string(*row) + ")" : what)
        , row_(row)
    {
    }

    std::optional<std::size_t> row() const noexcept { return row_; }

  private:
    std::optional<std::size_t> row_;
};

class BreakdownError : public NumericError
{
  public:
    using NumericError::NumericError;
};

class RankDeficiencyError : public NumericError
{
  public:
    using NumericError::NumericError;
};

class FitError : public NumericError
{
  public:
    using NumericError::NumericError;
};

}  // namespace hosf
