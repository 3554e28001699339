#pragma once

#include <stdexcept>
#include <string>

namespace abacmine {

// Base for every error raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad configuration or out-of-range parameter (exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent input data (exit code 3).
class DataError : public Error {
public:
    using Error::Error;
};

// Attribute or entity that the schema does not know about.
class SchemaMismatch : public DataError {
public:
    using DataError::DataError;
};

// Request references an entity id missing from the entity store.
class LookupError : public DataError {
public:
    using DataError::DataError;
};

// Brute-force enumeration would exceed the configured tuple cap (exit code 4).
class CapExceeded : public Error {
public:
    using Error::Error;
};

} // namespace abacmine
