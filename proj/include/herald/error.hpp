#pragma once

#include <stdexcept>
#include <string>

namespace herald {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A parameter or configuration value is outside its valid domain.
class InvalidParameter : public Error {
  public:
    using Error::Error;
};

/// A computation could not be carried out to the required accuracy.
class NumericalFailure : public Error {
  public:
    using Error::Error;
};

/// The heralded field has no photons, so ratios of moments are undefined.
class EmptyHeraldedField : public Error {
  public:
    explicit EmptyHeraldedField(const std::string& what = "empty heralded field") : Error(what) {}
};

/// Bob never clicks, so the error rate is undefined.
class NoDetections : public Error {
  public:
    explicit NoDetections(const std::string& what = "no detections") : Error(what) {}
};

class InsecureAtZeroDistance : public Error {
  public:
    explicit InsecureAtZeroDistance(const std::string& what = "insecure at zero distance") : Error(what) {}
};

class FitError : public Error {
  public:
    using Error::Error;
};

/// Bounds supplied for the loss model contradict the measured transmissions.
class InconsistentBounds : public Error {
  public:
    using Error::Error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw InvalidParameter(message);
    }
}

inline void require_probability(double p, const std::string& name) {
    require(p >= 0.0 && p <= 1.0, name + " must lie in [0, 1]");
}

}  // namespace detail
}  // namespace herald
