#pragma once

#include <stdexcept>
#include <string>

namespace camadapt {

// Root of every error the library throws. The CLI maps subclasses onto
// exit codes (see cli.hpp).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Vector/matrix dimensions that do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Argument outside the mathematical domain of an operation (tau <= 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Malformed serialized input: checkpoints, JSONL records, PGM headers.
class FormatError : public Error {
public:
    using Error::Error;
};

// Well-formed input whose contents violate a data contract
// (unknown class label, norm out of tolerance, duplicate ids).
class DataError : public Error {
public:
    using Error::Error;
};

// Invalid configuration values (sigma ordering, negative learning rate).
class ConfigError : public Error {
public:
    using Error::Error;
};

// A file could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

// Command-line misuse: unknown flags, unknown config keys, bad syntax.
class UsageError : public Error {
public:
    using Error::Error;
};

}  // namespace camadapt
