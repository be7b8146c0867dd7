#pragma once

#include "qbass/common.hpp"
#include "qbass/measures.hpp"

#include <cmath>
#include <complex>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace qbass {

class ConvexFunction;

/// y -> max_k <s_k, y> + b_k. Slopes are columns.
struct MaxAffine {
  PointSet slopes;
  Eigen::VectorXd intercepts;
};

/// Lower-semicontinuous function equal to values(j) at points.col(j) and +inf
/// elsewhere.
struct ValuesAtPoints {
  PointSet points;
  Eigen::VectorXd values;
};

/// y -> epsilon |y|^2 / 2 + beta log sum_k exp((<s_k, y> + b_k) / beta).
/// Strictly convex and smooth whenever epsilon > 0.
struct SmoothQuadLSE {
  double epsilon = 1e-3;
  double beta = 1e-2;
  PointSet slopes;
  Eigen::VectorXd intercepts;
};

/// Greatest convex minorant of finite data, +inf outside the convex hull of
/// the points. In d = 1 only the lower-hull vertices are kept, sorted; in
/// d >= 2 all points are kept and queries solve a small LP.
struct PolyhedralHull {
  PointSet points;
  Eigen::VectorXd values;
};

/// y -> sum_k u_k f(y + z_k): the star of f against a discrete measure.
struct StarSum {
  std::shared_ptr<const ConvexFunction> base;
  DiscreteMeasure shifts;
};

/// x -> sup_y <x, y> - f(y), computed per query by a concave maximization.
struct NumericConjugate {
  std::shared_ptr<const ConvexFunction> base;
};

class ConvexFunction {
 public:
  using Rep = std::variant<MaxAffine, ValuesAtPoints, SmoothQuadLSE, PolyhedralHull, StarSum,
                           NumericConjugate>;

  ConvexFunction(MaxAffine f);
  ConvexFunction(ValuesAtPoints f);
  ConvexFunction(SmoothQuadLSE f);
  ConvexFunction(PolyhedralHull f);
  ConvexFunction(StarSum f);
  ConvexFunction(NumericConjugate f);

  Eigen::Index dim() const { return dim_; }
  const Rep& rep() const { return rep_; }
  template <typename T>
  const T* as() const {
    return std::get_if<T>(&rep_);
  }
  /// Schema tag: max_affine, values, smooth_quad_lse, polyhedral_hull, star, conjugate.
  std::string type_name() const;
  /// True when value and gradient are exact closed forms with a Hessian.
  bool is_smooth() const;

 private:
  Rep rep_;
  Eigen::Index dim_ = 0;
};

/// Value at y; +inf off the effective domain.
double evaluate(const ConvexFunction& f, const Point& y);

/// Legendre-Fenchel conjugate. Exact for ValuesAtPoints, MaxAffine and
/// PolyhedralHull; an oracle for smooth representations.
ConvexFunction conjugate(const ConvexFunction& f);

/// y -> integral f(y + z) q(dz). ValuesAtPoints is rejected.
ConvexFunction star(const ConvexFunction& f, const DiscreteMeasure& q);

/// Greatest convex function below the data.
ConvexFunction convex_hull(const ValuesAtPoints& g);

/// A subgradient at y in the interior of the domain. Ties between affine
/// pieces resolve to the average of the active slopes.
Point grad_select(const ConvexFunction& f, const Point& y);

/// Hessian of a smooth representation (SmoothQuadLSE or a StarSum of one).
Eigen::MatrixXd hessian(const ConvexFunction& f, const Point& y);

/// Active pieces of a one-dimensional MaxAffine sorted by slope, with the
/// breakpoint between piece l and l + 1 at breaks[l] (strictly increasing).
struct AffineEnvelope1d {
  std::vector<double> slopes;
  std::vector<double> intercepts;
  std::vector<double> breaks;
  std::vector<Eigen::Index> source;  // originating piece index
};
AffineEnvelope1d upper_envelope_1d(const MaxAffine& f);

/// Lower convex hull vertices of (x_j, v_j) in d = 1 by monotone chain.
PolyhedralHull lower_hull_1d(const Eigen::VectorXd& x, const Eigen::VectorXd& v);
/// Indices of the lower hull vertices, sorted by x.
std::vector<Eigen::Index> lower_hull_indices_1d(const Eigen::VectorXd& x, const Eigen::VectorXd& v);

/// Convenience constructors.
ConvexFunction abs_function();                  // |y| in d = 1
ConvexFunction half_square(Eigen::Index d = 1); // |y|^2 / 2 as SmoothQuadLSE(eps = 1)

/// Value of a SmoothQuadLSE for any scalar type closed under exp/log, so
/// complex-step differentiation can check gradients to machine precision.
template <typename Scalar>
Scalar smooth_value(const SmoothQuadLSE& f, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& y) {
  using std::exp;
  using std::log;
  using std::real;
  const Eigen::Index k = f.slopes.cols();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> a(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    Scalar s = Scalar(f.intercepts(i));
    for (Eigen::Index r = 0; r < y.size(); ++r) s += Scalar(f.slopes(r, i)) * y(r);
    a(i) = s / Scalar(f.beta);
  }
  double shift = real(a(0));
  for (Eigen::Index i = 1; i < k; ++i) shift = std::max(shift, static_cast<double>(real(a(i))));
  Scalar sum = Scalar(0.0);
  for (Eigen::Index i = 0; i < k; ++i) sum += exp(a(i) - Scalar(shift));
  Scalar quad = Scalar(0.0);
  for (Eigen::Index r = 0; r < y.size(); ++r) quad += y(r) * y(r);
  return Scalar(0.5 * f.epsilon) * quad + Scalar(f.beta) * (Scalar(shift) + log(sum));
}

}  // namespace qbass
