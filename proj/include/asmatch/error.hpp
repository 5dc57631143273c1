#pragma once

#include <stdexcept>
#include <string>

namespace asmatch {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// graph / mapping
struct ParseError : Error { using Error::Error; };
struct SchemaViolation : Error { using Error::Error; };
struct InvalidMapping : Error { using Error::Error; };
struct IncompleteMapping : Error { using Error::Error; };
struct EmptyGraph : Error { using Error::Error; };
struct EmptySelection : Error { using Error::Error; };
struct IndexOutOfRange : Error { using Error::Error; };

// generation
struct SizeTooLarge : Error { using Error::Error; };
struct InfeasibleNoise : Error { using Error::Error; };

// search / oracle
struct TooLarge : Error { using Error::Error; };
struct QueryLargerThanTarget : Error { using Error::Error; };
struct TerminalState : Error { using Error::Error; };
struct IllegalAction : Error { using Error::Error; };
struct EmptyActionSet : Error { using Error::Error; };

// tensors
struct ShapeMismatch : Error { using Error::Error; };
struct NonFinite : Error { using Error::Error; };
struct NotScalar : Error { using Error::Error; };

// config / io
struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

}  // namespace asmatch
