#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace wiggly {

// Bad input data: malformed specs, dimension mismatches, out-of-range
// arguments. Maps to CLI exit code 2.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Numerical failure inside a solver: singular systems, ill-conditioned
// collocation intervals. Maps to CLI exit code 3.
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Iterative solve ran out of iterations; carries the last iterate so a
// caller can inspect or restart from it.
struct NonConvergenceError : SolverError {
  NonConvergenceError(const std::string& message, Eigen::VectorXd iterate,
                      double gradient_norm)
      : SolverError(message),
        last_iterate(std::move(iterate)),
        gradient_inf(gradient_norm) {}

  Eigen::VectorXd last_iterate;
  double gradient_inf;
};

// A stored solution failed a verification threshold. Maps to CLI exit code 4.
struct VerificationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace wiggly
