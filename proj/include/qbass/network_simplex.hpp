#pragma once

#include <Eigen/Dense>

namespace qbass {

struct TransportSolution {
  Eigen::MatrixXd flow;        // supply x demand
  Eigen::VectorXd row_potential;
  Eigen::VectorXd col_potential;
  double cost = 0.0;
  long pivots = 0;
};

/// Balanced transportation problem min <cost, flow> with row sums `supply`
/// and column sums `demand`, solved by the network simplex on the bipartite
/// graph (spanning-tree bases, northwest-corner start).
///
/// Potentials satisfy row_potential(i) + col_potential(j) <= cost(i, j) with
/// equality on every basic cell. Dantzig pricing switches to Bland's rule
/// after a run of degenerate pivots so the method cannot cycle.
TransportSolution solve_transport(const Eigen::MatrixXd& cost, const Eigen::VectorXd& supply,
                                  const Eigen::VectorXd& demand, double pivot_tol = 1e-12);

}  // namespace qbass
