#pragma once

#include <stdexcept>
#include <string>

namespace curvematch {

// Error taxonomy; the CLI maps these onto exit codes
// (argument/config -> 2, io/format -> 3, everything else -> 4).
struct argument_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct format_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct train_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace curvematch
