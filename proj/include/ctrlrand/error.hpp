#pragma once

#include <stdexcept>
#include <string>

namespace ctrlrand {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user input: bad parameters, malformed config, unknown keys.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A numerical routine could not produce a (finite) result.
class NumericalError : public Error {
public:
    using Error::Error;
};

inline void require(bool cond, const std::string& msg)
{
    if (!cond) {
        throw ConfigError(msg);
    }
}

} // namespace ctrlrand
