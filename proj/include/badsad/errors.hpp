#pragma once

#include <stdexcept>
#include <string>

namespace badsad {

// Error taxonomy shared by the library and the CLI. The CLI maps each
// branch onto a fixed exit code: configuration/usage -> 2, data/format -> 3,
// numerical/training -> 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid shapes fed to an operator (reports the offending axis).
struct DimensionError : Error {
    using Error::Error;
};

// Invalid settings: bad hyperparameters, oversize triggers, missing subsets.
struct ConfigError : Error {
    using Error::Error;
};

// API misuse: empty inputs, stale tape, non-scalar backward root.
struct UsageError : Error {
    using Error::Error;
};

// Malformed data files (bad magic, bad record length).
struct FormatError : Error {
    using Error::Error;
};

// Missing or truncated files.
struct IoError : Error {
    using Error::Error;
};

// A subset request exceeds the available pool.
struct CapacityError : Error {
    using Error::Error;
};

// Loss went non-finite during training.
struct TrainingError : Error {
    using Error::Error;
};

// Iterative numerics failed to converge.
struct NumericalError : Error {
    using Error::Error;
};

inline int exit_code_for(const Error& e) {
    if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const IoError*>(&e) ||
        dynamic_cast<const CapacityError*>(&e)) {
        return 3;
    }
    if (dynamic_cast<const TrainingError*>(&e) || dynamic_cast<const NumericalError*>(&e)) {
        return 4;
    }
    return 2;
}

}  // namespace badsad
