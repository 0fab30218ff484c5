#pragma once

#include <stdexcept>
#include <string>

namespace peaklab {

// Error taxonomy used for CLI exit codes: validation_error maps to exit 2,
// every other peaklab::error to exit 1, anything else to exit 3.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// bad parameters, bad config, preconditions on user input
struct validation_error : error {
    using error::error;
};

// series / root finding / quadrature failed to reach its tolerance
struct convergence_error : error {
    using error::error;
};

// result would be dominated by floating-point cancellation
struct precision_error : error {
    using error::error;
};

// time stepper step-size underflow, negativity abort, Newton failure
struct integration_error : error {
    using error::error;
};

// amplitude-state decomposition rejected the data
struct decomposition_error : error {
    using error::error;
};

// fixed-point sweep expanded instead of contracting
struct contraction_error : error {
    using error::error;
};

} // namespace peaklab
