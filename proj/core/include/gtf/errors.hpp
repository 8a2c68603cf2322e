#pragma once

#include <stdexcept>
#include <string>

namespace gtf {

// Base for all library errors so callers can catch gtf::Error generically.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// comparison
struct NonMonotone : Error { using Error::Error; };
struct MissingOrigin : Error { using Error::Error; };
struct KindMismatch : Error { using Error::Error; };

// expression parsing / system assembly
struct SyntaxError : Error {
    std::size_t offset;
    std::string expected;
    SyntaxError(std::size_t off, const std::string& exp)
        : Error("syntax error at offset " + std::to_string(off) + ", expected " + exp),
          offset(off), expected(exp) {}
};
struct UnknownSymbol : Error { using Error::Error; };
struct TriangularityViolation : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct NonFiniteValue : Error { using Error::Error; };
struct BadParameter : Error { using Error::Error; };
struct DerivativeUnavailable : Error { using Error::Error; };

// backstepping
struct NoBracket : Error { using Error::Error; };
struct DegenerateControlDirection : Error { using Error::Error; };
struct LocalSynthesisFailed : Error { using Error::Error; };

// cover
struct LadderInfeasible : Error {
    int failing_q;
    LadderInfeasible(int q, const std::string& what)
        : Error("ladder infeasible at q=" + std::to_string(q) + ": " + what), failing_q(q) {}
};
struct OutOfRange : Error { using Error::Error; };
struct ControlNotFound : Error { using Error::Error; };
struct MarginLost : Error { using Error::Error; };
struct CoverageGap : Error { using Error::Error; };

// certification / obstruction
struct HorizonTooShort : Error { using Error::Error; };
struct EnsembleMismatch : Error { using Error::Error; };
struct VanishingVector : Error { using Error::Error; };
struct Undersampled : Error { using Error::Error; };

}  // namespace gtf
