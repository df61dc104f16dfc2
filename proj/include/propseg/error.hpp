#pragma once

#include <stdexcept>

namespace propseg {

// Input that breaks a documented contract (bad geometry, malformed file,
// missing mandatory parameter). The CLI maps these to exit status 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class GeometryError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace propseg
