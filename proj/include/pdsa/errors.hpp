#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace pdsa {

// Base for every contract violation raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad user-supplied configuration; `path` names the offending field,
// e.g. "graph.atoms[2].prob".
struct ConfigError : Error {
  ConfigError(std::string fieldPath, const std::string& message)
      : Error(fieldPath + ": " + message), path(std::move(fieldPath)) {}
  std::string path;
};

struct InvalidArgument : Error {
  using Error::Error;
};

// network
struct MeanGraphDisconnected : Error {
  using Error::Error;
};
struct Disconnected : Error {
  using Error::Error;
};

// problem
struct NoNoiseModel : Error {
  using Error::Error;
};

// asymptotics
struct NoKnownOptimum : Error {
  using Error::Error;
};
struct HessianSumNotPD : Error {
  using Error::Error;
};
struct NotHurwitz : Error {
  using Error::Error;
};

// statistics
struct DegenerateVariance : Error {
  using Error::Error;
};
struct TooFewSamples : Error {
  using Error::Error;
};

}  // namespace pdsa
