#pragma once

#include <stdexcept>

namespace fedvi {

// Invalid user-supplied configuration or domain argument (CLI exit 1).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem / stream failure, message carries the path (CLI exit 2).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A internal consistency check failed; indicates a bug, not bad input (CLI exit 3).
struct InvariantError : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace fedvi
