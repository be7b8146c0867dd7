#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <vector>

namespace qbass::lp {

enum class Status { Optimal, Infeasible, Unbounded, IterationLimit };

const char* to_string(Status status);

struct Options {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-10;
  double pivot_tol = 1e-11;
  long max_iterations = 2'000'000;
  int refactor_every = 64;
  /// Consecutive degenerate pivots tolerated before switching to Bland's rule.
  int bland_after = 64;
};

/// Standard form: minimize c'x subject to Ax = b, x >= 0.
struct Problem {
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
};

struct Result {
  Status status = Status::IterationLimit;
  double objective = 0.0;
  Eigen::VectorXd x;
  /// Row multipliers y with c - A'y >= 0 at an optimum.
  Eigen::VectorXd duals;
  long iterations = 0;
};

/// Two-phase bounded revised simplex with an explicit basis inverse.
///
/// Redundant equality rows are tolerated: their artificial variable stays
/// basic at level zero and is never allowed to move during phase two.
Result solve(const Problem& problem, const Options& options = {});

/// Incremental builder for sparse equality-constrained problems.
class ProblemBuilder {
 public:
  explicit ProblemBuilder(Eigen::Index num_vars) : c_(Eigen::VectorXd::Zero(num_vars)) {}

  Eigen::Index add_row(double rhs) {
    b_.push_back(rhs);
    return static_cast<Eigen::Index>(b_.size()) - 1;
  }
  void add(Eigen::Index row, Eigen::Index var, double value) {
    if (value != 0.0) triplets_.emplace_back(row, var, value);
  }
  void set_cost(Eigen::Index var, double cost) { c_(var) = cost; }

  Problem build() const;

 private:
  Eigen::VectorXd c_;
  std::vector<double> b_;
  std::vector<Eigen::Triplet<double>> triplets_;
};

}  // namespace qbass::lp
