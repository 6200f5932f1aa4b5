#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mssnn {

// Scalar type used by the training/inference stack. Tests instantiate the
// templated numerics at double for finite-difference checks; the packaged
// pipeline runs at float so checkpoints (stored as 32-bit floats) round-trip
// losslessly and resumed training is bit-identical.
#ifdef MSSNN_REAL_DOUBLE
using real = double;
#else
using real = float;
#endif

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes; message names both shapes.
struct DimensionError : Error {
    using Error::Error;
};

// Caller violated an operation precondition (empty sequence, k out of range, ...).
struct ContractError : Error {
    using Error::Error;
};

// Unreadable/malformed files, format or artifact mismatches. Exit code 2.
struct DataError : Error {
    using Error::Error;
};

// NaN losses, zero-vector normalization, degenerate sampling. Exit code 3.
struct NumericError : Error {
    using Error::Error;
};

// Sparse distribution over token ids: (id, probability) per row.
using SparseTargets = std::vector<std::vector<std::pair<int, double>>>;

}  // namespace mssnn
