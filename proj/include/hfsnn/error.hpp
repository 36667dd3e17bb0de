#pragma once

#include <stdexcept>
#include <string>

namespace hfsnn {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data that violates a schema or a precondition on its contents
/// (malformed CSV rows, short series, shape mismatches).
class DataError : public Error {
public:
    using Error::Error;
};

/// Parameter or configuration values outside their legal domain.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace hfsnn
