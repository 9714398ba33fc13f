#pragma once

#include <stdexcept>
#include <string>

namespace nlox {

/// Base class for all library errors.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite values, singular systems, integration failures.
struct numeric_error : error {
    using error::error;
};

/// An observer or filter state left its admissible region.
struct divergence_error : numeric_error {
    divergence_error(const std::string& what, long step) : numeric_error(what), step_index(step) {}
    long step_index;
};

/// Malformed or inconsistent configuration.
struct config_error : error {
    using error::error;
};

/// Filesystem and serialization failures.
struct io_error : error {
    using error::error;
};

} // namespace nlox
