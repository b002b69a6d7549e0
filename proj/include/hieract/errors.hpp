#pragma once

#include <stdexcept>
#include <string>

namespace hieract {

/// Operand shapes are incompatible for the requested operation.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A documented precondition of an operation was violated by the caller.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// An experiment or model configuration is invalid or inconsistent.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A file on disk does not follow the expected layout.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A lookup by identifier failed (sample id, feature id, label name).
class MissingIdError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

} // namespace hieract
