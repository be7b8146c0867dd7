#include "qbass/measures.hpp"

#include "qbass/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace qbass {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

bool lex_less(const PointSet& a, Index i, Index j) {
  for (Index r = 0; r < a.rows(); ++r) {
    if (a(r, i) < a(r, j)) return true;
    if (a(r, i) > a(r, j)) return false;
  }
  return false;
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(PointSet atoms, VectorXd weights, double merge_tol) {
  if (atoms.cols() != weights.size()) {
    throw SchemaError("measure: " + std::to_string(atoms.cols()) + " atoms but " +
                      std::to_string(weights.size()) + " weights");
  }
  if (atoms.rows() < 1) throw SchemaError("measure: dimension must be at least 1");
  if (!atoms.allFinite() || !weights.allFinite()) {
    throw SchemaError("measure: atoms and weights must be finite");
  }
  if ((weights.array() < 0.0).any()) throw SchemaError("measure: negative weight");
  const double total = weights.sum();
  if (std::abs(total - 1.0) > 1e-6) {
    throw SchemaError("measure: total mass " + std::to_string(total) + " is not 1");
  }

  std::vector<Index> order;
  for (Index i = 0; i < atoms.cols(); ++i) {
    if (weights(i) > 0.0) order.push_back(i);
  }
  if (order.empty()) throw SchemaError("measure: no atom with positive weight");
  std::sort(order.begin(), order.end(),
            [&](Index i, Index j) { return lex_less(atoms, i, j); });

  // Greedy merge against earlier representatives whose leading coordinate is
  // within tolerance; sorted order bounds the backward scan.
  std::vector<Index> reps;
  std::vector<double> mass;
  for (Index i : order) {
    bool merged = false;
    for (auto r = static_cast<std::ptrdiff_t>(reps.size()) - 1; r >= 0; --r) {
      const Index k = reps[static_cast<size_t>(r)];
      if (atoms(0, i) - atoms(0, k) > merge_tol) break;
      if ((atoms.col(i) - atoms.col(k)).lpNorm<Eigen::Infinity>() <= merge_tol) {
        mass[static_cast<size_t>(r)] += weights(i);
        merged = true;
        break;
      }
    }
    if (!merged) {
      reps.push_back(i);
      mass.push_back(weights(i));
    }
  }

  atoms_.resize(atoms.rows(), static_cast<Index>(reps.size()));
  weights_.resize(static_cast<Index>(reps.size()));
  for (size_t r = 0; r < reps.size(); ++r) {
    atoms_.col(static_cast<Index>(r)) = atoms.col(reps[r]);
    weights_(static_cast<Index>(r)) = mass[r];
  }
  // Rescaling an already normalized vector would perturb it in the last bit
  // and break exact round trips.
  const double sum = weights_.sum();
  if (std::abs(sum - 1.0) > 4.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(weights_.size())) {
    weights_ /= sum;
  }
}

DiscreteMeasure DiscreteMeasure::dirac(const Point& x) {
  return DiscreteMeasure(x, VectorXd::Ones(1));
}

DiscreteMeasure DiscreteMeasure::from_1d(const std::vector<double>& atoms,
                                         const std::vector<double>& weights) {
  PointSet a = Eigen::Map<const Eigen::RowVectorXd>(atoms.data(), static_cast<Index>(atoms.size()));
  VectorXd w = Eigen::Map<const VectorXd>(weights.data(), static_cast<Index>(weights.size()));
  return DiscreteMeasure(std::move(a), std::move(w));
}

DiscreteMeasure DiscreteMeasure::uniform(PointSet atoms) {
  const Index n = atoms.cols();
  return DiscreteMeasure(std::move(atoms), VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
}

DiscreteMeasure DiscreteMeasure::normalized(PointSet atoms, VectorXd weights, double merge_tol) {
  const double total = weights.sum();
  if (!(total > 0.0)) throw SchemaError("measure: total mass must be positive");
  return DiscreteMeasure(std::move(atoms), weights / total, merge_tol);
}

std::optional<Index> DiscreteMeasure::find(const Point& x, double tol) const {
  for (Index i = 0; i < size(); ++i) {
    if ((atoms_.col(i) - x).lpNorm<Eigen::Infinity>() <= tol) return i;
  }
  return std::nullopt;
}

DiscreteMeasure DiscreteMeasure::shifted(const Point& c) const {
  require_dimension(dim(), c.size(), "shift");
  PointSet a = atoms_.colwise() + c;
  return DiscreteMeasure(std::move(a), weights_);
}

bool approx_equal(const DiscreteMeasure& a, const DiscreteMeasure& b, double tol) {
  if (a.dim() != b.dim() || a.size() != b.size()) return false;
  return (a.atoms() - b.atoms()).lpNorm<Eigen::Infinity>() <= tol &&
         (a.weights() - b.weights()).lpNorm<Eigen::Infinity>() <= tol;
}

Point barycenter(const DiscreteMeasure& p) { return p.atoms() * p.weights(); }

double second_moment(const DiscreteMeasure& p) {
  return p.atoms().colwise().squaredNorm().dot(p.weights());
}

DiscreteMeasure convolve(const DiscreteMeasure& alpha, const DiscreteMeasure& q) {
  require_dimension(alpha.dim(), q.dim(), "convolve");
  const Index n = alpha.size() * q.size();
  PointSet atoms(alpha.dim(), n);
  VectorXd weights(n);
  Index c = 0;
  for (Index i = 0; i < alpha.size(); ++i) {
    for (Index k = 0; k < q.size(); ++k, ++c) {
      atoms.col(c) = alpha.atoms().col(i) + q.atoms().col(k);
      weights(c) = alpha.weight(i) * q.weight(k);
    }
  }
  return DiscreteMeasure::normalized(std::move(atoms), std::move(weights));
}

DiscreteMeasure pushforward(const DiscreteMeasure& p, const PointMap& map) {
  PointSet atoms;
  for (Index i = 0; i < p.size(); ++i) {
    Point y;
    try {
      y = map(p.atom(i));
    } catch (const std::exception& e) {
      throw DomainError("pushforward: map undefined at atom " + std::to_string(i) + ": " + e.what());
    }
    if (!y.allFinite()) {
      throw DomainError("pushforward: map undefined at atom " + std::to_string(i));
    }
    if (i == 0) atoms.resize(y.size(), p.size());
    if (y.size() != atoms.rows()) throw DomainError("pushforward: inconsistent image dimension");
    atoms.col(i) = y;
  }
  return DiscreteMeasure::normalized(std::move(atoms), p.weights());
}

DiscreteMeasure MartingaleKernel::row_measure(Index i) const {
  return DiscreteMeasure::normalized(target, rows.row(i).transpose().cwiseMax(0.0));
}

DiscreteMeasure MartingaleKernel::mixture() const {
  VectorXd w = rows.transpose() * base.weights();
  return DiscreteMeasure::normalized(target, w.cwiseMax(0.0));
}

double MartingaleKernel::barycenter_residual() const {
  double worst = 0.0;
  for (Index i = 0; i < size(); ++i) {
    const Point bary = target * rows.row(i).transpose();
    worst = std::max(worst, (bary - base.atom(i)).lpNorm<Eigen::Infinity>());
  }
  return worst;
}

double MartingaleKernel::row_sum_residual() const {
  return (rows.rowwise().sum().array() - 1.0).abs().maxCoeff();
}

namespace {

// MT(mu, nu) polytope over pi_ij (index i * |nu| + j): row sums, column sums,
// and centred barycenter rows sum_j pi_ij (y_j - x_i) = 0.
lp::ProblemBuilder martingale_polytope(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const Index m = mu.size();
  const Index n = nu.size();
  lp::ProblemBuilder builder(m * n);
  for (Index i = 0; i < m; ++i) {
    const Index r = builder.add_row(mu.weight(i));
    for (Index j = 0; j < n; ++j) builder.add(r, i * n + j, 1.0);
  }
  for (Index j = 0; j < n; ++j) {
    const Index r = builder.add_row(nu.weight(j));
    for (Index i = 0; i < m; ++i) builder.add(r, i * n + j, 1.0);
  }
  for (Index i = 0; i < m; ++i) {
    for (Index d = 0; d < mu.dim(); ++d) {
      const Index r = builder.add_row(0.0);
      for (Index j = 0; j < n; ++j) builder.add(r, i * n + j, nu.atoms()(d, j) - mu.atoms()(d, i));
    }
  }
  return builder;
}

MartingaleKernel kernel_from_plan(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                  const VectorXd& plan) {
  const Index m = mu.size();
  const Index n = nu.size();
  MatrixXd rows(m, n);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) rows(i, j) = std::max(0.0, plan(i * n + j)) / mu.weight(i);
  }
  return MartingaleKernel{mu, nu.atoms(), rows};
}

}  // namespace

ConvexOrderResult check_convex_order(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  require_dimension(mu.dim(), nu.dim(), "check_convex_order");
  const lp::Problem problem = martingale_polytope(mu, nu).build();
  const lp::Result res = lp::solve(problem);
  ConvexOrderResult out;
  if (res.status != lp::Status::Optimal) return out;
  out.ordered = true;
  out.witness = kernel_from_plan(mu, nu, res.x);
  return out;
}

IrreducibilityResult check_irreducible(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  require_dimension(mu.dim(), nu.dim(), "check_irreducible");
  const Index m = mu.size();
  const Index n = nu.size();
  lp::Problem problem = martingale_polytope(mu, nu).build();

  constexpr double kPositive = 1e-12;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> charged =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(m, n, false);
  auto absorb = [&](const VectorXd& x) {
    for (Index v = 0; v < x.size(); ++v) {
      if (x(v) > kPositive) charged(v / n, v % n) = true;
    }
  };

  {
    const lp::Result feas = lp::solve(problem);
    if (feas.status != lp::Status::Optimal) throw DomainError("not in convex order");
    absorb(feas.x);
  }

  IrreducibilityResult out;
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (charged(i, j)) continue;
      problem.c.setZero();
      problem.c(i * n + j) = -1.0;
      const lp::Result res = lp::solve(problem);
      if (res.status == lp::Status::Optimal) absorb(res.x);
      if (!charged(i, j)) {
        out.blocking_pair = std::make_pair(mu.atom(i), nu.atom(j));
        return out;
      }
    }
  }
  out.irreducible = true;
  return out;
}

}  // namespace qbass
