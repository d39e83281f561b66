#pragma once

#include <stdexcept>
#include <string>

namespace lcpm {

// Error categories map onto CLI exit codes: I/O, schema, parse and
// validation failures are data errors (exit 2); NumericError covers
// numerical breakdowns such as non-positive-definite covariances or a
// vanished likelihood (exit 3).

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lcpm
