#pragma once

#include <stdexcept>
#include <string>

namespace irtp {

// Input problems (bad files, bad flags, out-of-range categories). The CLI
// maps these to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CategoryRangeError : public InputError {
public:
    using InputError::InputError;
};

class ConfigError : public InputError {
public:
    using InputError::InputError;
};

// Numerical failures. The CLI maps these to exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EstimationError : public NumericalError {
public:
    EstimationError(const std::string& what, int item = -1)
        : NumericalError(what), item_(item) {}
    int item() const noexcept { return item_; }

private:
    int item_;
};

class InversionError : public NumericalError {
public:
    InversionError(const std::string& what, double smallest_eigenvalue);
    double smallest_eigenvalue() const noexcept { return smallest_eigenvalue_; }

private:
    double smallest_eigenvalue_;
};

class DegenerateMomentsError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace irtp
