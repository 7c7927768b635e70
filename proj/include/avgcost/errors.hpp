#pragma once

#include <stdexcept>
#include <string>

namespace avgcost {

// Malformed model, small set, or argument. The CLI maps these to exit code 2.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The chain induced by a policy has more than one recurrent class.
class MultichainError : public ModelError {
 public:
  using ModelError::ModelError;
};

// An iterative or linear solve failed to produce an answer. Exit code 3.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Value iteration with a wrong average-cost guess drifts linearly.
class DivergenceError : public SolverError {
 public:
  using SolverError::SolverError;
};

}  // namespace avgcost
