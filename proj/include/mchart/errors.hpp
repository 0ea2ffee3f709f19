#pragma once

#include <stdexcept>
#include <string>

namespace mchart {

// Parameter or observation outside the domain of a family, prior or design.
// std::domain_error is used directly for those; the two below cover the
// remaining failure classes.

/// Operation is invalid for the object's current state (e.g. stepping a
/// detector that has already stopped).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A configured size cap was exceeded (grid cardinality, oracle path length).
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mchart
