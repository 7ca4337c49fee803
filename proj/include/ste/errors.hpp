#pragma once

#include <stdexcept>
#include <string>

namespace ste {

// Error taxonomy; the CLI maps these onto exit codes 1 (config),
// 2 (data), 3 (numeric abort). Shape errors indicate programmer or
// model-spec mistakes and get caught as config-level problems.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

} // namespace ste
