#pragma once

#include "qbass/convexfn.hpp"
#include "qbass/measures.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace qbass {

struct BassDiagnostics {
  double w2_mu = 0.0;  // W2((grad v star q)(alpha), mu)
  double w2_nu = 0.0;  // W2(grad v(alpha * q), nu)
  double strict_convexity_margin = 0.0;
};

/// (v_hat, alpha_hat) with (grad v_hat star q)(alpha_hat) = mu and
/// grad v_hat(alpha_hat * q) = nu, up to the attached diagnostics.
struct BassPair {
  ConvexFunction v_hat;
  DiscreteMeasure alpha_hat;
  BassDiagnostics diagnostics;
};

struct GeneratingReport {
  bool interior_domain = false;     // (i) mu charges only int(dom v*)
  bool strictly_convex = false;     // (ii) margin > 0 and gradient exchange
  bool finite_second_moment = false;  // (iii)
  double strict_convexity_margin = 0.0;
  /// max over sampled y of |grad(v star q)(y) - (grad v star q)(y)|.
  double exchange_residual = 0.0;
  std::string message;

  bool ok() const { return interior_domain && strictly_convex && finite_second_moment; }
};

/// Checks the three generating conditions. The gradient of v star q is
/// taken by complex-step differentiation of the finite sum and compared with
/// the q-average of grad v at 50 seeded random points.
GeneratingReport check_generating(const ConvexFunction& v, const DiscreteMeasure& mu, const DiscreteMeasure& q,
                                  std::uint64_t seed = 0);

/// grad v star q at y.
Point star_gradient(const ConvexFunction& v, const DiscreteMeasure& q, const Point& y);

/// Solves (grad v star q)(a) = x for the smooth SmoothQuadLSE family,
/// residual <= 1e-10. Throws DomainError naming x and the residual.
Point invert_star_gradient(const ConvexFunction& v, const DiscreteMeasure& q, const Point& x);

struct BassGeneration {
  BassPair pair;
  DiscreteMeasure nu;
  MartingaleKernel kernel;  // pi_x = grad v(alpha(x) + .)(q) over the atoms of nu
  /// alpha(x_i) for each atom of mu, in the order of mu.
  PointSet preimages;
};

/// alpha = inverse of grad(v star q) pushed through mu, nu = grad v(alpha * q).
BassGeneration generate_from_v(const ConvexFunction& v, const DiscreteMeasure& mu, const DiscreteMeasure& q);

struct BassVerification {
  bool passed = false;
  double w2_mu = 0.0;
  double w2_nu = 0.0;
  /// max over atoms x of mu of |bary(pi_x) - x|, with pi_x built from a fresh
  /// inversion at x.
  double barycenter_residual = 0.0;
};

BassVerification verify_bass(const BassPair& pair, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                             const DiscreteMeasure& q, double tol);

/// Paths (A, Z, X0, X1): A ~ alpha, Z ~ q independent, X0 = (grad v star q)(A),
/// X1 = grad v(A + Z). Columns are paths.
struct PathTable {
  PointSet a, z, x0, x1;
  std::vector<Eigen::Index> alpha_index;  // atom of alpha drawn for each path
  Eigen::Index size() const { return a.cols(); }
};

/// Deterministic in (pair, q, n_paths, seed): paths are generated in fixed
/// chunks, each with its own stream seeded from (seed, chunk index), so the
/// table does not depend on the number of worker threads.
PathTable simulate(const BassPair& pair, const DiscreteMeasure& q, long n_paths, std::uint64_t seed);

struct FixedPointConfig {
  double tol = 5e-3;
  long max_iter = 500;
  int pieces = 32;
  double epsilon = 1e-3;
  /// Upper bound on the smoothing temperature; each fit may use a smaller one
  /// so that transitions stay between neighbouring atoms.
  double beta = 1e-2;
  std::uint64_t seed = 0;
  /// Standard deviation of the seeded perturbation of alpha_0 = mu.
  double init_jitter = 0.1;
};

struct FixedPointResult {
  BassPair pair;
  bool converged = false;
  std::vector<double> residuals;
  long iterations = 0;
};

/// Experimental inverse solver in d = 1: alternate a monotone fit of grad v to
/// the quantile map from alpha * q onto nu with re-solving alpha from mu.
/// The residual of iteration n is the sum of both W2 mismatches of the pair
/// (v_n, alpha_{n+1}) it produces. Non-convergence is a reported outcome.
FixedPointResult fixed_point_solve(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const DiscreteMeasure& q,
                                   const FixedPointConfig& config = {});

/// Smooth monotone fit: SmoothQuadLSE with the given epsilon whose gradient
/// approximates target(j) at the sorted points x(j) (weighted least squares
/// with at most `pieces` affine pieces).
SmoothQuadLSE fit_monotone_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& target,
                                    const Eigen::VectorXd& weights, int pieces, double epsilon,
                                    double max_beta);

}  // namespace qbass
