#pragma once

#include <stdexcept>
#include <string>

namespace micekit {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input text (CSV cells, unknown levels, header mismatches).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration: bad schema, inconsistent method map, broken invariants.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// File-system and stream failures.
class IoError : public Error {
public:
    using Error::Error;
};

/// Numerical failure inside an engine (non-convergence, rank deficiency, no donors).
class ComputeError : public Error {
public:
    using Error::Error;
};

} // namespace micekit
