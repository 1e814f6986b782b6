#pragma once

#include <stdexcept>
#include <string>

namespace bowlsim {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value encountered while stepping the physics.
class SimulationFault : public Error {
 public:
  using Error::Error;
};

/// Invalid parameters, workspace or configuration file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A trace or spectrum that cannot be analysed (too short, window empty, ...).
class AnalysisError : public Error {
 public:
  using Error::Error;
};

/// Spectrum with no energy outside the DC bin.
class DegenerateSpectrum : public AnalysisError {
 public:
  using AnalysisError::AnalysisError;
};

/// Unbalanced or otherwise malformed ANOVA design.
class DesignError : public Error {
 public:
  using Error::Error;
};

/// Data with zero residual variance or a singular covariance.
class DegenerateData : public Error {
 public:
  using Error::Error;
};

}  // namespace bowlsim
