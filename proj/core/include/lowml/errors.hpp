#pragma once

#include <stdexcept>
#include <string>

namespace lowml {

// Problems with input data: missing files, malformed CSV, bad folder
// layouts, shape mismatches between datasets and models.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite loss or gradients during training.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

// Predictor/topic bundle problems, each load failure mode distinct.
class BundleMissingFileError : public std::runtime_error {
public:
    explicit BundleMissingFileError(const std::string& msg) : std::runtime_error(msg) {}
};

class BundleChecksumError : public std::runtime_error {
public:
    explicit BundleChecksumError(const std::string& msg) : std::runtime_error(msg) {}
};

class BundleVersionError : public std::runtime_error {
public:
    explicit BundleVersionError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace lowml
