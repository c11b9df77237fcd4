#pragma once

#include <stdexcept>
#include <string>

namespace poisclt {

/// Malformed arguments to a library call (bad dimension, negative time, ...).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An experiment or model configuration violates a documented constraint.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operation not defined on the given domain (e.g. time restriction of a space-only process).
class DomainError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Parameter combination outside what the implementation supports.
class UnsupportedError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Divergent integral, non-finite moment or heavy-tail blowup detected by an estimator.
class NumericalDiagnostic : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace poisclt
