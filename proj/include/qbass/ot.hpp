#pragma once

#include "qbass/measures.hpp"

namespace qbass {

/// Joint mass over left x right supports with prescribed marginals.
struct Coupling {
  DiscreteMeasure left;
  DiscreteMeasure right;
  Eigen::MatrixXd mass;  // left.size() x right.size()

  /// Largest marginal violation (sup-norm over rows and columns).
  double marginal_residual() const;
};

enum class CouplingMethod {
  Auto,          // comonotone in d = 1, network simplex otherwise
  Comonotone,    // d = 1 only
  NetworkSimplex
};

struct MCovResult {
  double value = 0.0;
  Coupling coupling;
  /// Potentials for the cost -<y, z>: row(i) + col(j) <= -<y_i, z_j>, with
  /// equality wherever the coupling charges (i, j).
  Eigen::VectorXd row_potential;
  Eigen::VectorXd col_potential;
};

/// Maximal covariance sup over couplings of integral <y, z>.
MCovResult mcov(const DiscreteMeasure& p, const DiscreteMeasure& q,
                CouplingMethod method = CouplingMethod::Auto);

/// Barycentric projection of an optimal coupling, defined on atoms of the
/// source measure.
class BarycentricMap {
 public:
  BarycentricMap(PointSet source, PointSet image) : source_(std::move(source)), image_(std::move(image)) {}

  /// Image of a source atom; DomainError off the support.
  Point operator()(const Point& z) const;
  const PointSet& source() const { return source_; }
  const PointSet& image() const { return image_; }

 private:
  PointSet source_;
  PointSet image_;
};

/// Quadratic-cost optimal map from q to p in barycentric form
/// z_k -> sum_j mass(k, j) y_j / u_k. Maps split mass when the discrete
/// problem forces it, so compare pushforwards rather than maps.
BarycentricMap brenier_map(const DiscreteMeasure& q, const DiscreteMeasure& p);

/// Quadratic Wasserstein distance.
double wasserstein2(const DiscreteMeasure& p, const DiscreteMeasure& r);

}  // namespace qbass
