#pragma once

#include <stdexcept>
#include <string>

namespace bcx {

// Base class for all library failures. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class SolverError : public Error {
public:
    SolverError(const std::string& what, double residual = 0.0, int iterations = 0)
        : Error(what), residual_(residual), iterations_(iterations) {}

    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double residual_;
    int iterations_;
};

class DataError : public Error {
public:
    enum class Kind { io, manifest, shape, checksum };

    DataError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

// Non-finite loss or parameters during training.
class DivergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace bcx
