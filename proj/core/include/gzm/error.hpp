#pragma once

#include <stdexcept>
#include <string>

namespace gzm {

// Base class for everything thrown by this library.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor shape / dimension mismatches, non-scalar losses, alignment faults.
struct shape_error : error {
    using error::error;
};

// Invalid scalar arguments (beta <= 0, horizon 0, negative noise, ...).
struct param_error : error {
    using error::error;
};

// Out-of-range indices (class targets, folds, codebook rows).
struct index_error : error {
    using error::error;
};

// Bad or inconsistent configuration (unknown keys, unknown fusion mode, ...).
struct config_error : error {
    using error::error;
};

// Malformed files: datasets, checkpoints, reports.
struct data_error : error {
    using error::error;
};

// Training-time failures: divergence, non-finite gradients.
struct train_error : error {
    using error::error;
};

// Non-finite values crossing an operation boundary.
struct numerics_error : error {
    using error::error;
};

}  // namespace gzm
