#ifndef SRNKIT_ERRORS_HPP
#define SRNKIT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace srnkit {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Matrix-level failures.
struct ZeroMatrixError : Error {
    ZeroMatrixError() : Error("operation undefined for the zero matrix") {}
};
struct ConvergenceFailure : Error {
    using Error::Error;
};
struct DimensionMismatch : Error {
    using Error::Error;
};

// Normalization / projection failures.
struct InfeasibleError : Error {
    using Error::Error;
};
struct NotSymmetricError : Error {
    using Error::Error;
};
struct SmoothingExhausted : Error {
    using Error::Error;
};

// Measures.
struct ZeroMarginError : Error {
    ZeroMarginError() : Error("sample has zero margin") {}
};
struct ZeroOutputError : Error {
    ZeroOutputError() : Error("model output is zero on a data point") {}
};
struct EmptyAfterSkip : Error {
    using Error::Error;
};
struct DegenerateData : Error {
    using Error::Error;
};

// I/O.
struct ParseError : Error {
    using Error::Error;
};

}  // namespace srnkit

#endif
