#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace omegasim {

/// Base class for all omegasim errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A value fell outside the range of its dimension or parameter.
struct RangeError : Error {
    using Error::Error;
};

/// Two configuration points belong to different spaces.
struct SpaceMismatchError : Error {
    using Error::Error;
};

/// An exhaustive analysis would exceed the configured enumeration cap.
struct CapacityError : Error {
    using Error::Error;
};

/// A referenced address, pattern or entry does not exist.
struct NotFoundError : Error {
    using Error::Error;
};

/// Operand shapes or lengths do not agree.
struct ShapeError : Error {
    using Error::Error;
};

/// An arc or rule references a nonexistent endpoint.
struct ReferenceError : Error {
    using Error::Error;
};

/// Remap parameters name an unregistered divergence dimension.
struct MappingError : Error {
    using Error::Error;
};

/// Division-domain violations (zero epsilon, zero pattern size).
struct DomainError : Error {
    using Error::Error;
};

/// N-space is empty: the hazard key is undefined, which is distinct from 0.
struct NoHazardError : Error {
    using Error::Error;
};

/// A strategy cannot be scheduled under the active channel bandwidths.
struct InfeasibleStrategyError : Error {
    using Error::Error;
};

/// The eligible strategy set is empty; the engine escalates to recovery.
struct NoEligibleStrategyError : Error {
    using Error::Error;
};

/// Memory-based planning was asked on an empty association table.
struct NoMemoryError : Error {
    using Error::Error;
};

/// Fragments or partitions overlap.
struct ConflictError : Error {
    using Error::Error;
};

/// A level-1 string position matches no dictionary token.
struct UnknownTokenError : Error {
    using Error::Error;
};

/// Repairable compression requires a corrective-field coverage mask.
struct MissingMaskError : Error {
    using Error::Error;
};

/// A disturbance produced an address outside the space in strict mode.
struct DisturbanceRangeError : Error {
    using Error::Error;
};

/// A decomposition would lose content or break a dependency.
struct ImpermissibleDecompositionError : Error {
    using Error::Error;
};

/// Direct storage-to-plant coupling without a controller.
struct ForbiddenCompositionError : Error {
    using Error::Error;
};

/// Duplex repair exceeded its retry cap.
struct UnrecoverableTransferError : Error {
    using Error::Error;
};

/// Nested storage is not a function of the hosting plant configuration.
struct CannotConsolidateError : Error {
    using Error::Error;
};

/// Scenario text failed to parse; carries 1-based line and column.
struct ParseError : Error {
    std::size_t line = 0;
    std::size_t column = 0;

    ParseError(std::size_t line_, std::size_t column_, const std::string& what_)
        : Error("line " + std::to_string(line_) + ":" + std::to_string(column_) + ": " + what_),
          line(line_),
          column(column_) {}
};

} // namespace omegasim
