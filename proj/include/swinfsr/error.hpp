#pragma once

#include <stdexcept>
#include <string>

namespace swinfsr {

// Shape/contract violations (dimension mismatch, bad op arguments).
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad external inputs: files, PNG decoding, dataset layout, checkpoints, configs.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failures: non-finite values, failed gradient checks.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace swinfsr
