#pragma once

#include "qbass/common.hpp"

namespace qbass::detail {

struct BarycentricLpResult {
  bool feasible = false;
  double value = kInf;
  Eigen::MatrixXd lambda;  // rows x atoms
  Point multiplier;        // dual of the barycenter rows
};

/// min sum_{k,l} lambda(k,l) cost(k,l)
///   s.t. sum_l lambda(k,l) = row_mass(k), sum_{k,l} lambda(k,l) atoms.col(l) = target,
///        lambda >= 0.
/// The barycenter multiplier is a maximizer of the dual concave program.
BarycentricLpResult barycentric_lp(const Eigen::MatrixXd& cost, const Eigen::VectorXd& row_mass,
                                   const PointSet& atoms, const Point& target);

}  // namespace qbass::detail
