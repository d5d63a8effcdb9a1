#pragma once

#include <stdexcept>
#include <string>

namespace sml {

/// Violated API precondition (bad shapes, labels outside the class stack, ...).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Bad run configuration: unknown keys, unparsable values, impossible protocols.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public ConfigError {
public:
    ParseError(const std::string& msg, long line)
        : ConfigError(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
    explicit ParseError(const std::string& msg) : ConfigError(msg), line_(-1) {}
    long line() const { return line_; }

private:
    long line_;
};

/// Filesystem / environment failure.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training aborted (non-finite loss).
class TrainAbortError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Checkpoint container is corrupt or does not match the expected schema.
class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A class token with no attribute vector.
class UnknownClassError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Factorization failed even after the jitter escalation.
class SingularMatrixError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A mask with an empty foreground or background region where both are required.
class DegenerateMaskError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The dataset cannot supply the requested episode protocol.
class SamplingError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

} // namespace sml
