#include "qbass/ot.hpp"

#include "qbass/network_simplex.hpp"

#include <algorithm>
#include <cmath>

namespace qbass {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double Coupling::marginal_residual() const {
  const double rows = (mass.rowwise().sum() - left.weights()).lpNorm<Eigen::Infinity>();
  const double cols = (mass.colwise().sum().transpose() - right.weights()).lpNorm<Eigen::Infinity>();
  return std::max(rows, cols);
}

namespace {

// Northwest-corner staircase over sorted one-dimensional supports: the
// comonotone coupling, optimal for every submodular cost. Potentials are
// propagated along the staircase, which is a spanning tree of the bipartite
// graph.
TransportSolution staircase(const MatrixXd& cost, const VectorXd& a, const VectorXd& b) {
  const Index m = a.size();
  const Index n = b.size();
  TransportSolution sol;
  sol.flow = MatrixXd::Zero(m, n);
  sol.row_potential = VectorXd::Zero(m);
  sol.col_potential = VectorXd::Zero(n);
  VectorXd ra = a;
  VectorXd rb = b * (a.sum() / b.sum());
  Index i = 0, j = 0;
  sol.col_potential(0) = cost(0, 0);
  while (true) {
    const double f = std::max(0.0, std::min(ra(i), rb(j)));
    sol.flow(i, j) += f;
    ra(i) -= f;
    rb(j) -= f;
    if (i == m - 1 && j == n - 1) break;
    bool next_row;
    if (i == m - 1) {
      next_row = false;
    } else if (j == n - 1) {
      next_row = true;
    } else {
      next_row = ra(i) <= rb(j);
    }
    if (next_row) {
      ++i;
      sol.row_potential(i) = cost(i, j) - sol.col_potential(j);
    } else {
      ++j;
      sol.col_potential(j) = cost(i, j) - sol.row_potential(i);
    }
  }
  sol.flow(m - 1, n - 1) += std::max(0.0, std::min(ra(m - 1), rb(n - 1)));
  sol.cost = (sol.flow.array() * cost.array()).sum();
  return sol;
}

TransportSolution optimal_transport(const DiscreteMeasure& p, const DiscreteMeasure& q,
                                    const MatrixXd& cost, CouplingMethod method) {
  if (method == CouplingMethod::Auto) {
    method = p.dim() == 1 ? CouplingMethod::Comonotone : CouplingMethod::NetworkSimplex;
  }
  if (method == CouplingMethod::Comonotone) {
    if (p.dim() != 1) throw DomainError("comonotone coupling requires d = 1");
    return staircase(cost, p.weights(), q.weights());
  }
  return solve_transport(cost, p.weights(), q.weights());
}

}  // namespace

MCovResult mcov(const DiscreteMeasure& p, const DiscreteMeasure& q, CouplingMethod method) {
  require_dimension(p.dim(), q.dim(), "mcov");
  const MatrixXd cost = -(p.atoms().transpose() * q.atoms());
  const TransportSolution sol = optimal_transport(p, q, cost, method);
  MCovResult out{-sol.cost, Coupling{p, q, sol.flow}, sol.row_potential, sol.col_potential};
  return out;
}

Point BarycentricMap::operator()(const Point& z) const {
  for (Index k = 0; k < source_.cols(); ++k) {
    if ((source_.col(k) - z).lpNorm<Eigen::Infinity>() <= 1e-9) return image_.col(k);
  }
  throw DomainError("barycentric map: point is not an atom of the source measure");
}

BarycentricMap brenier_map(const DiscreteMeasure& q, const DiscreteMeasure& p) {
  const MCovResult res = mcov(q, p);
  PointSet image = p.atoms() * res.coupling.mass.transpose();
  for (Index k = 0; k < q.size(); ++k) image.col(k) /= res.coupling.mass.row(k).sum();
  return BarycentricMap(q.atoms(), std::move(image));
}

double wasserstein2(const DiscreteMeasure& p, const DiscreteMeasure& r) {
  require_dimension(p.dim(), r.dim(), "wasserstein2");
  MatrixXd cost(p.size(), r.size());
  for (Index i = 0; i < p.size(); ++i) {
    for (Index j = 0; j < r.size(); ++j) cost(i, j) = (p.atom(i) - r.atom(j)).squaredNorm();
  }
  const TransportSolution sol = optimal_transport(p, r, cost, CouplingMethod::Auto);
  return std::sqrt(std::max(0.0, sol.cost));
}

}  // namespace qbass
