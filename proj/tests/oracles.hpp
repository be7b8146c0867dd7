#pragma once

// Independent reference computations for the test suites. Nothing here may
// call into the code path it is used to check.

#include "qbass/lp.hpp"
#include "qbass/measures.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

namespace qbass::testing {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline DiscreteMeasure random_measure(std::mt19937_64& rng, Index n, Index d = 1, double spread = 2.0) {
  std::uniform_real_distribution<double> pos(-spread, spread);
  std::uniform_real_distribution<double> w(0.2, 1.0);
  PointSet atoms(d, n);
  VectorXd weights(n);
  for (Index i = 0; i < n; ++i) {
    for (Index r = 0; r < d; ++r) atoms(r, i) = pos(rng);
    weights(i) = w(rng);
  }
  return DiscreteMeasure::normalized(atoms, weights);
}

inline DiscreteMeasure random_equal_weight(std::mt19937_64& rng, Index n, Index d) {
  std::uniform_real_distribution<double> pos(-2.0, 2.0);
  PointSet atoms(d, n);
  for (Index i = 0; i < n; ++i) {
    for (Index r = 0; r < d; ++r) atoms(r, i) = pos(rng);
  }
  return DiscreteMeasure::uniform(atoms);
}

struct OrderedPair {
  DiscreteMeasure mu;
  DiscreteMeasure nu;
};

/// mu <=_c nu by construction: every atom of mu splits into a mean-preserving
/// pair (or stays put), so the splitting itself is a martingale coupling.
inline OrderedPair martingale_split_1d(std::mt19937_64& rng, Index mu_atoms, Index nu_max) {
  const DiscreteMeasure mu = random_measure(rng, mu_atoms, 1, 1.5);
  std::uniform_real_distribution<double> gap(0.1, 1.5);
  std::vector<double> ys, ws;
  Index budget = nu_max;
  for (Index i = 0; i < mu.size(); ++i) {
    const double x = mu.atoms()(0, i);
    const double m = mu.weight(i);
    const Index remaining_atoms = mu.size() - i - 1;
    if (budget - 2 >= remaining_atoms) {
      const double a = gap(rng), b = gap(rng);
      ys.push_back(x - a);
      ws.push_back(m * b / (a + b));
      ys.push_back(x + b);
      ws.push_back(m * a / (a + b));
      budget -= 2;
    } else {
      ys.push_back(x);
      ws.push_back(m);
      budget -= 1;
    }
  }
  return {mu, DiscreteMeasure::from_1d(ys, ws)};
}

/// max over permutations of (1/n) sum_i <y_i, z_sigma(i)>: at equal weights the
/// vertices of the coupling polytope are permutation matrices (Birkhoff).
inline double mcov_permutation_bruteforce(const PointSet& y, const PointSet& z) {
  const Index n = y.cols();
  std::vector<Index> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1e300;
  do {
    double s = 0.0;
    for (Index i = 0; i < n; ++i) s += y.col(i).dot(z.col(perm[static_cast<size_t>(i)]));
    best = std::max(best, s / static_cast<double>(n));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Transportation problem through the general simplex, as a second route
/// next to the network simplex.
inline double transport_via_general_lp(const MatrixXd& cost, const VectorXd& a, const VectorXd& b) {
  const Index m = a.size(), n = b.size();
  lp::ProblemBuilder builder(m * n);
  for (Index i = 0; i < m; ++i) {
    const Index r = builder.add_row(a(i));
    for (Index j = 0; j < n; ++j) builder.add(r, i * n + j, 1.0);
  }
  for (Index j = 0; j < n; ++j) {
    const Index r = builder.add_row(b(j));
    for (Index i = 0; i < m; ++i) builder.add(r, i * n + j, 1.0);
  }
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) builder.set_cost(i * n + j, cost(i, j));
  }
  return lp::solve(builder.build()).objective;
}

/// One-dimensional quantile-function W2 by merging the two CDFs.
inline double w2_quantile_1d(const DiscreteMeasure& p, const DiscreteMeasure& r) {
  Index i = 0, j = 0;
  double ra = p.weight(0), rb = r.weight(0), acc = 0.0;
  while (i < p.size() && j < r.size()) {
    const double m = std::min(ra, rb);
    const double diff = p.atoms()(0, i) - r.atoms()(0, j);
    acc += m * diff * diff;
    ra -= m;
    rb -= m;
    if (ra <= 1e-15 && ++i < p.size()) ra = p.weight(i);
    if (rb <= 1e-15 && ++j < r.size()) rb = r.weight(j);
  }
  return std::sqrt(acc);
}

/// One-dimensional maximal covariance through the quantile functions.
inline double mcov_quantile_1d(const DiscreteMeasure& p, const DiscreteMeasure& r) {
  Index i = 0, j = 0;
  double ra = p.weight(0), rb = r.weight(0), acc = 0.0;
  while (i < p.size() && j < r.size()) {
    const double m = std::min(ra, rb);
    acc += m * p.atoms()(0, i) * r.atoms()(0, j);
    ra -= m;
    rb -= m;
    if (ra <= 1e-15 && ++i < p.size()) ra = p.weight(i);
    if (rb <= 1e-15 && ++j < r.size()) rb = r.weight(j);
  }
  return acc;
}

}  // namespace qbass::testing
