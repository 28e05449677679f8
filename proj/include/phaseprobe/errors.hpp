#pragma once

#include <stdexcept>
#include <string>

namespace phaseprobe {

// Base for all domain errors raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// prompt registry
struct UnknownPrompt : Error {
  using Error::Error;
};
struct MarkerMissing : Error {
  using Error::Error;
};
struct MarkerDuplicated : Error {
  using Error::Error;
};
struct EmptyInput : Error {
  using Error::Error;
};

// statistics
struct EmptySample : Error {
  using Error::Error;
};
struct SampleTooSmall : Error {
  using Error::Error;
};
struct InvalidDf : Error {
  using Error::Error;
};

// providers
struct FixtureMissing : Error {
  using Error::Error;
};

// experiment
struct ManifestInvalid : Error {
  using Error::Error;
};
struct StoreLocked : Error {
  using Error::Error;
};
struct UnknownCondition : Error {
  using Error::Error;
};

// report
struct EmptyMatrix : Error {
  using Error::Error;
};

}  // namespace phaseprobe
