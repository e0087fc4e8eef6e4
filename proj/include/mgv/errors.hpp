#pragma once

#include <stdexcept>
#include <string>

namespace mgv {

// Error taxonomy. Everything user-facing derives from Error so the CLI can
// catch one type and print the message.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Signal codec violations: field outside frame bounds, id mismatch.
struct CodecError : Error {
    using Error::Error;
};

// Malformed log lines / gateway tuples. Carries a byte offset where known.
struct ParseError : Error {
    ParseError(const std::string& what, size_t byte_offset)
        : Error(what + " (byte " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}
    explicit ParseError(const std::string& what) : Error(what), offset(0) {}
    size_t offset;
};

// Bad scenario/dictionary files, unknown keys, missing referenced files.
struct ConfigError : Error {
    using Error::Error;
};

// Gateway translation failures (unknown parameter, bad tuple).
struct GatewayError : Error {
    using Error::Error;
};

// API misuse that a correct caller never triggers (detached tap, etc).
struct UsageError : Error {
    using Error::Error;
};

// Bad arguments to analysis routines (window smaller than step, ...).
struct ArgumentError : Error {
    using Error::Error;
};

}  // namespace mgv
