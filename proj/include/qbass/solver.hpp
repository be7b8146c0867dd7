#pragma once

#include "qbass/convexfn.hpp"
#include "qbass/measures.hpp"
#include "qbass/ot.hpp"

#include <vector>

namespace qbass {

struct PrimalOptions {
  /// Joint LP size guard on |mu| * |nu| * |q|.
  Eigen::Index max_variables = 2'000'000;
};

struct PrimalResult {
  double value = 0.0;
  MartingaleKernel kernel;
  /// Optimal coupling between pi_{x_i} and q, one per atom of mu.
  std::vector<Coupling> conditional_couplings;
  long iterations = 0;
};

/// sup over martingale couplings pi of sum_i m_i MCov(pi_{x_i}, q), solved
/// as one LP over the joint mass c_ijk at (x_i, y_j, z_k): the inner
/// covariance maximization and the outer martingale maximization merge into
/// a single linear program.
PrimalResult solve_primal_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                             const DiscreteMeasure& q, const PrimalOptions& options = {});

/// Convex dual variable: values on the atoms of nu, +inf elsewhere, with its
/// conjugate y -> max_j <y_j, y> - psi_j cached.
class DualPotential {
 public:
  DualPotential(PointSet support, Eigen::VectorXd values);

  const PointSet& support() const { return values_fn_.points; }
  const Eigen::VectorXd& values() const { return values_fn_.values; }
  Eigen::Index size() const { return values_fn_.values.size(); }
  Eigen::Index dim() const { return values_fn_.points.rows(); }
  ConvexFunction function() const { return values_fn_; }
  const MaxAffine& conjugate() const { return conjugate_; }

  /// psi_j = f(y_j) on the atoms of a measure.
  static DualPotential restrict(const ConvexFunction& f, const PointSet& support);

 private:
  ValuesAtPoints values_fn_;
  MaxAffine conjugate_;
};

struct PhiResult {
  double value = 0.0;
  /// A maximizer of y -> <x, y> - (psi* star q)(y).
  Point y_hat;
  /// Optimal p in the infimum, as weights over the support of psi.
  Eigen::VectorXd p_hat;
};

/// phi^psi(x) = inf over p with barycenter x of (int psi dp - MCov(p, q)),
/// evaluated as the concave maximum sup_y (<x, y> - int psi*(y + z) q(dz)).
/// d = 1 sweeps the breakpoints of the piecewise-affine objective exactly;
/// d >= 2 solves the equivalent LP. x must lie in the closed convex hull of
/// the support of psi; outside it phi is -inf and DomainError is thrown.
PhiResult phi_psi(const DualPotential& psi, const DiscreteMeasure& q, const Point& x);

/// sup over all p of MCov(p, q) - int psi dp = int psi* dq (may be +inf).
double phi_unconstrained(const ConvexFunction& psi, const DiscreteMeasure& q);
double phi_unconstrained(const DualPotential& psi, const DiscreteMeasure& q);

/// Relaxed dual functional sum_i m_i (int psi d pi_{x_i} - phi^psi(x_i)) for a
/// martingale kernel whose target is the support of psi.
double dual_value_relaxed(const DualPotential& psi, const DiscreteMeasure& mu,
                          const DiscreteMeasure& nu, const DiscreteMeasure& q,
                          const MartingaleKernel& kernel);

struct DualEvaluation {
  double value = 0.0;         // F(psi)
  Eigen::VectorXd subgradient;
};

/// F(psi) = sum_j n_j psi_j - sum_i m_i phi^psi(x_i) and a subgradient
/// n - sum_i m_i p_hat_i, convex in the values of psi.
DualEvaluation dual_objective(const DualPotential& psi, const DiscreteMeasure& mu,
                              const DiscreteMeasure& nu, const DiscreteMeasure& q);

struct DualConfig {
  double gap_tol = 1e-5;
  long max_iter = 20000;
  /// Solve the primal LP first and use its value as the Polyak target.
  bool use_primal_target = true;
  /// Initial step scale for diminishing steps when no target is used.
  double step0 = 1.0;
};

struct DualResult {
  double value = 0.0;
  DualPotential psi;
  long iterations = 0;
  /// value - primal value (NaN without a primal target).
  double gap = 0.0;
  double primal_value = 0.0;
};

/// Subgradient descent on F over values on the support of nu, gauge-fixed
/// by psi(y_0) = 0 at the lexicographically smallest atom. Returns the best
/// iterate; hitting the iteration cap is not an error.
DualResult solve_dual(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const DiscreteMeasure& q,
                      const DualConfig& config = {});

}  // namespace qbass
