#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>

namespace qbass {

using Point = Eigen::VectorXd;
using PointSet = Eigen::MatrixXd;  // one point per column

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Violated mathematical precondition: order violation, infeasibility,
/// evaluation outside a domain, non-convergence.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad schema, dimension mismatch in a file, I/O failure.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require_dimension(Eigen::Index expected, Eigen::Index got, const char* what) {
  if (expected != got) {
    throw DomainError(std::string("dimension mismatch in ") + what + ": expected " +
                      std::to_string(expected) + ", got " + std::to_string(got));
  }
}

}  // namespace qbass
