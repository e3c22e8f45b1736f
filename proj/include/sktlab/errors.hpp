#pragma once

#include <stdexcept>
#include <string>

namespace sktlab {

/// Base class of every error raised by the library.
class SktError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public SktError {
public:
    using SktError::SktError;
};

/// Raised by the Poisson solve when the right-hand side is not in the range of the Laplacian.
class NonZeroMean : public SktError {
public:
    using SktError::SktError;
};

class InvalidArgument : public SktError {
public:
    using SktError::SktError;
};

/// A jump was requested from a state whose total rate is zero.
class FrozenState : public SktError {
public:
    using SktError::SktError;
};

class NegativeDensity : public SktError {
public:
    using SktError::SktError;
};

class SmallnessViolation : public SktError {
public:
    using SktError::SktError;
};

class ConfigError : public SktError {
public:
    using SktError::SktError;
};

class IoError : public SktError {
public:
    using SktError::SktError;
};

/// A verifier met inputs it cannot certify (e.g. a reference that is not resolved).
class CertificationError : public SktError {
public:
    using SktError::SktError;
};

}  // namespace sktlab
