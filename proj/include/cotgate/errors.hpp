#pragma once

#include <stdexcept>

namespace cotgate {

// Bad input: malformed record files, out-of-range arguments, violated
// preconditions. The CLI maps this to its input-error exit code.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Transport or protocol failure while talking to an inference endpoint.
struct EndpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace cotgate
