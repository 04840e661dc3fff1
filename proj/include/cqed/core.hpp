// core.hpp: scalar/matrix aliases, physical constants and the error hierarchy
// shared by every cqed module.

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cqed {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

inline constexpr Complex kI{0.0, 1.0};
inline constexpr double kPi = std::numbers::pi;

namespace units {
inline constexpr double planck = 6.62607015e-34;     // J s
inline constexpr double boltzmann = 1.380649e-23;    // J / K
inline constexpr double us = 1e-6;
}  // namespace units

// Every failure raised by the library derives from cqed::Error so that callers
// (the CLI in particular) can map numerical/validation failures to one exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TruncationTooSmall : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class ZeroField : public Error {
public:
    using Error::Error;
};

class ZeroSeparation : public Error {
public:
    using Error::Error;
};

class FieldTooSmall : public Error {
public:
    using Error::Error;
};

class StepTooLarge : public Error {
public:
    using Error::Error;
};

class FitDidNotConverge : public Error {
public:
    using Error::Error;
};

class PeakCountMismatch : public Error {
public:
    using Error::Error;
};

class ZeroProbabilityOutcome : public Error {
public:
    using Error::Error;
};

class InvariantViolation : public Error {
public:
    using Error::Error;
};

// Configuration/usage problems; the CLI reports these with exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace cqed
