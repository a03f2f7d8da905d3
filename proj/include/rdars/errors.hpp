#pragma once

#include <stdexcept>
#include <string>

namespace rdars {

// Bad user input: geometry, parameters, config keys. The CLI maps these to exit code 1.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InvalidGeometry : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

class InvalidParameter : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

class InvalidConfig : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

// Failures discovered while computing. The CLI maps these to exit code 2.
class ComputeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public ComputeError {
public:
    using ComputeError::ComputeError;
};

class DegenerateChannel : public ComputeError {
public:
    using ComputeError::ComputeError;
};

class Infeasible : public ComputeError {
public:
    using ComputeError::ComputeError;
};

class SearchCapExceeded : public ComputeError {
public:
    using ComputeError::ComputeError;
};

} // namespace rdars
