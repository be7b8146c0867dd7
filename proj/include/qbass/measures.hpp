#pragma once

#include "qbass/common.hpp"

#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace qbass {

/// Atoms closer than this in sup-norm are merged on construction.
inline constexpr double kMergeTol = 1e-12;

/// Finitely supported probability measure on R^d.
///
/// Atoms are stored column-wise in lexicographic order, pairwise distinct up
/// to the merge tolerance, with strictly positive weights summing to one.
class DiscreteMeasure {
 public:
  /// Zero weights are dropped, negative weights are rejected, and a total mass
  /// further than 1e-6 from one is rejected rather than rescaled.
  DiscreteMeasure(PointSet atoms, Eigen::VectorXd weights, double merge_tol = kMergeTol);

  static DiscreteMeasure dirac(const Point& x);
  static DiscreteMeasure from_1d(const std::vector<double>& atoms, const std::vector<double>& weights);
  /// Equal weights on the given atoms.
  static DiscreteMeasure uniform(PointSet atoms);
  /// Same as the constructor but rescales any positive total mass to one.
  static DiscreteMeasure normalized(PointSet atoms, Eigen::VectorXd weights,
                                    double merge_tol = kMergeTol);

  Eigen::Index dim() const { return atoms_.rows(); }
  Eigen::Index size() const { return atoms_.cols(); }
  const PointSet& atoms() const { return atoms_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  Point atom(Eigen::Index i) const { return atoms_.col(i); }
  double weight(Eigen::Index i) const { return weights_(i); }

  /// Index of the atom within `tol` (sup-norm) of x, if any.
  std::optional<Eigen::Index> find(const Point& x, double tol = 1e-9) const;

  DiscreteMeasure shifted(const Point& c) const;

 private:
  PointSet atoms_;
  Eigen::VectorXd weights_;
};

/// Sup-norm closeness of atoms and weights (both measures canonicalized).
bool approx_equal(const DiscreteMeasure& a, const DiscreteMeasure& b, double tol = 1e-12);

Point barycenter(const DiscreteMeasure& p);
double second_moment(const DiscreteMeasure& p);

/// Law of A + Z for independent A ~ alpha, Z ~ q.
DiscreteMeasure convolve(const DiscreteMeasure& alpha, const DiscreteMeasure& q);

using PointMap = std::function<Point(const Point&)>;

/// Image measure T(p). Throws DomainError if T fails on an atom.
DiscreteMeasure pushforward(const DiscreteMeasure& p, const PointMap& map);

/// Disintegration {pi_x} of a coupling in MT(mu, nu) or any kernel over the
/// atoms of a base measure: row i is a probability vector over `target`.
struct MartingaleKernel {
  DiscreteMeasure base;
  PointSet target;
  Eigen::MatrixXd rows;  // base.size() x target.cols()

  Eigen::Index size() const { return rows.rows(); }
  /// pi_{x_i} as a measure (zero entries dropped).
  DiscreteMeasure row_measure(Eigen::Index i) const;
  /// Sum_i m_i pi_{x_i}.
  DiscreteMeasure mixture() const;
  /// max_i |bary(pi_{x_i}) - x_i| in sup-norm.
  double barycenter_residual() const;
  /// max_i |sum_j rows(i, j) - 1|.
  double row_sum_residual() const;
};

struct ConvexOrderResult {
  bool ordered = false;
  std::optional<MartingaleKernel> witness;
};

/// Strassen test: mu <=_c nu iff MT(mu, nu) is non-empty; decided by LP
/// feasibility, with a feasible kernel returned as witness.
ConvexOrderResult check_convex_order(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

struct IrreducibilityResult {
  bool irreducible = false;
  std::optional<std::pair<Point, Point>> blocking_pair;
};

/// Every atom pair (x_i, y_j) must carry positive mass under some martingale
/// coupling. One LP per pair not already charged by an earlier optimum, so up
/// to |mu| * |nu| LPs: expensive beyond desk scale.
IrreducibilityResult check_irreducible(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

}  // namespace qbass
