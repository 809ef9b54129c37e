#pragma once

#include <stdexcept>
#include <string>

namespace rfcl {

// Dimension or layout mismatch between tensors, kernels, or transforms.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed on-disk artifact (dataset, filter bank, model, ...).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Precondition on a scalar argument violated (k > rows, fanin > n1, ...).
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Non-finite values appeared during a computation.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input statistics make a transform undefined (zero variance).
class DegenerateDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace rfcl
