#include "barycentric_lp.hpp"

#include "qbass/lp.hpp"

namespace qbass::detail {

BarycentricLpResult barycentric_lp(const Eigen::MatrixXd& cost, const Eigen::VectorXd& row_mass,
                                   const PointSet& atoms, const Point& target) {
  using Eigen::Index;
  const Index rows = cost.rows();
  const Index n = cost.cols();
  const Index d = atoms.rows();
  lp::ProblemBuilder builder(rows * n);
  for (Index k = 0; k < rows; ++k) {
    const Index r = builder.add_row(row_mass(k));
    for (Index l = 0; l < n; ++l) {
      builder.add(r, k * n + l, 1.0);
      builder.set_cost(k * n + l, cost(k, l));
    }
  }
  const double total = row_mass.sum();
  for (Index c = 0; c < d; ++c) {
    // Centred rows: sum lambda (s_l - target / total) = 0 keeps the scale of b small.
    const Index r = builder.add_row(0.0);
    for (Index k = 0; k < rows; ++k) {
      for (Index l = 0; l < n; ++l) builder.add(r, k * n + l, atoms(c, l) - target(c) / total);
    }
  }
  const lp::Result res = lp::solve(builder.build());
  BarycentricLpResult out;
  if (res.status == lp::Status::Infeasible) return out;
  if (res.status != lp::Status::Optimal) {
    throw DomainError(std::string("barycentric LP: ") + lp::to_string(res.status));
  }
  out.feasible = true;
  out.value = res.objective;
  out.lambda = Eigen::Map<const Eigen::MatrixXd>(res.x.data(), n, rows).transpose();
  out.multiplier = res.duals.tail(d);
  return out;
}

}  // namespace qbass::detail
