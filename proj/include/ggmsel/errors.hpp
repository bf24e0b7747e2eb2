#pragma once
#include <stdexcept>
#include <string>

namespace ggmsel {

/// Argument outside the mathematical domain of an operation (x < 0, non-PD Ω, bad parameters).
class DomainError : public std::domain_error
{
public:
    using std::domain_error::domain_error;
};

/// Malformed or inconsistent input data (shapes, files, flags).
class InputError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// NaN/Inf in iterates, failed factorizations, non-contracting iterations.
class NumericalError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class IterationLimitError : public NumericalError
{
public:
    using NumericalError::NumericalError;
};

class IoError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

} // namespace ggmsel
