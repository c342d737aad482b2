#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spherecal {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A row of the input matrix has L2 norm at or below the degeneracy floor.
struct ZeroNormRow : Error {
    std::size_t row;
    explicit ZeroNormRow(std::size_t r)
        : Error("row " + std::to_string(r) + " has zero (or sub-floor) L2 norm"), row(r) {}
};

struct TooFewPoints : Error {
    explicit TooFewPoints(std::size_t n)
        : Error("need at least 2 points, got " + std::to_string(n)) {}
};

struct InvalidMatrix : Error {
    using Error::Error;
};

struct DegenerateProbability : Error {
    using Error::Error;
};

struct NonFiniteGradient : Error {
    NonFiniteGradient() : Error("gradient contains NaN or Inf") {}
};

struct ShapeMismatch : Error {
    using Error::Error;
};

struct EmptyLog : Error {
    EmptyLog() : Error("prediction log is empty") {}
};

struct RaggedProbabilities : Error {
    using Error::Error;
};

struct UnsupportedDimension : Error {
    using Error::Error;
};

// Pairwise angle sits inside the arccos clamp band, where the angular
// gradient-norm law no longer holds.
struct ClampBand : Error {
    using Error::Error;
};

struct EmptySet : Error {
    EmptySet() : Error("empty input set") {}
};

// CSV / config parse failure; line is 1-based, 0 when not line-specific.
struct ParseError : Error {
    std::size_t line;
    ParseError(const std::string& what, std::size_t line_no = 0)
        : Error(line_no ? what + " (line " + std::to_string(line_no) + ")" : what),
          line(line_no) {}
};

}  // namespace spherecal
