#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace rehabcl {

// Single RNG type used across the library. Every randomized operation takes
// an explicit engine (or a seed) so runs are reproducible.
using Rng = std::mt19937_64;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad caller input: invalid argument values, shape mismatches, empty inputs.
struct ArgumentError : Error {
    using Error::Error;
};

// Malformed content in an input file (message carries file and line).
struct ParseError : Error {
    using Error::Error;
};

// Missing/unreadable source files or inconsistent dataset contents.
struct IngestError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Checkpoint version mismatch or corruption.
struct CheckpointError : Error {
    using Error::Error;
};

// Metric undefined for the given inputs (single-class truth, constant ranks).
struct MetricError : Error {
    using Error::Error;
};

// Warning sink threaded through operations that degrade gracefully.
// Null pointer means the caller does not care.
using Warnings = std::vector<std::string>;

inline void warn(Warnings* sink, std::string message) {
    if (sink) sink->push_back(std::move(message));
}

}  // namespace rehabcl
