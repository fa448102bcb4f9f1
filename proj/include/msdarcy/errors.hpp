#pragma once

#include <stdexcept>
#include <string>

namespace msdarcy {

/// Base class for all toolkit errors. Every failure mode maps to one of the
/// derived categories below so callers can react programmatically.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Fine grid counts are not an exact multiple of the coarse counts.
class NestingError : public Error {
public:
    using Error::Error;
};

/// Nonpositive cell counts or a degenerate domain box.
class InvalidGrid : public Error {
public:
    using Error::Error;
};

/// Cell/face index out of range.
class IndexError : public Error {
public:
    using Error::Error;
};

/// Malformed or incomplete configuration (missing seeds, bad keys, grid mismatch).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Coefficient vanishes on an entire cell quadrature set; the weighted mass
/// matrix would be singular.
class DegenerateCoefficient : public Error {
public:
    using Error::Error;
};

/// Source/boundary data violate the divergence-theorem compatibility condition.
class CompatibilityError : public Error {
public:
    using Error::Error;
};

/// Linear solver failed to reach the requested residual.
class SolverError : public Error {
public:
    using Error::Error;
};

/// Explicit transport step requested above the CFL limit.
class CFLError : public Error {
public:
    using Error::Error;
};

/// Oversampling region construction or its 6x6 DoF-matching system failed.
class OversampleError : public Error {
public:
    using Error::Error;
};

/// Coarse basis functions are (numerically) linearly dependent on a cell.
class DegenerateBasis : public Error {
public:
    using Error::Error;
};

/// Argument outside its mathematical domain (e.g. saturation outside [0,1]).
class DomainError : public Error {
public:
    using Error::Error;
};

} // namespace msdarcy
