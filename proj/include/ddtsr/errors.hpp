#pragma once

#include <stdexcept>
#include <string>

namespace ddtsr {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed inputs: bad distributions, inconsistent structs, bad file contents.
struct ValidationError : Error {
    using Error::Error;
};

// A scored token is missing from the oracle vocabulary. No smoothing, ever:
// a desk-scale oracle that silently backed off would hide fixture typos.
struct UnknownTokenError : Error {
    using Error::Error;
};

// Config file / CLI flag problems.
struct ConfigError : Error {
    using Error::Error;
};

// A latency quantity cannot be derived because the trace lacks an event kind.
struct MeasurementError : Error {
    using Error::Error;
};

// Session-level runtime failure (component threw mid-run).
struct SessionError : Error {
    using Error::Error;
};

// Remote endpoint unreachable / timed out.
struct RemoteError : Error {
    using Error::Error;
};

// Remote endpoint reachable but spoke the wire format wrong.
struct ProtocolError : Error {
    using Error::Error;
};

} // namespace ddtsr
