#include "qbass/bass.hpp"

#include "barycentric_lp.hpp"
#include "qbass/ot.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <complex>
#include <cstdio>
#include <random>
#include <thread>

namespace qbass {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInverseTol = 1e-10;
constexpr double kMinFitBeta = 1e-6;
constexpr int kExchangeSamples = 50;
constexpr Index kChunk = 4096;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string fmt_point(const Point& x) {
  std::string s = "(";
  for (Index r = 0; r < x.size(); ++r) s += (r ? ", " : "") + fmt(x(r));
  return s + ")";
}

// Open convex hull membership: x and its small axis perturbations all lie in
// conv(slopes).
bool in_interior_of_hull(const PointSet& slopes, const Point& x) {
  const Index d = x.size();
  if (d == 1) {
    return x(0) > slopes.row(0).minCoeff() && x(0) < slopes.row(0).maxCoeff();
  }
  const double delta = 1e-9 * (1.0 + x.norm());
  const MatrixXd zero = MatrixXd::Zero(1, slopes.cols());
  for (Index r = 0; r < d; ++r) {
    for (double sign : {-1.0, 1.0}) {
      const Point probe = x + sign * delta * Point::Unit(d, r);
      if (!detail::barycentric_lp(zero, VectorXd::Ones(1), slopes, probe).feasible) return false;
    }
  }
  return true;
}

// Solves (grad v star q)(a) = x via the gradient of the conjugate of v star q.
class StarInverter {
 public:
  StarInverter(const ConvexFunction& v, const DiscreteMeasure& q) : v_(v), q_(q), conj_(conjugate(star(v, q))) {}

  Point operator()(const Point& x) const {
    Point a;
    try {
      a = grad_select(conj_, x);
    } catch (const DomainError& e) {
      throw DomainError("inverse of grad(v star q) failed at x = " + fmt_point(x) + ": " + e.what());
    }
    const double res = (star_gradient(v_, q_, a) - x).norm();
    if (!(res <= kInverseTol * std::max(1.0, x.norm())) && !brackets_1d(a, x)) {
      throw DomainError("inverse of grad(v star q) did not converge at x = " + fmt_point(x) + ", residual " +
                        fmt(res));
    }
    return a;
  }

 private:
  // In d = 1, x lies between the star gradient a few ulps either side of a.
  bool brackets_1d(const Point& a, const Point& x) const {
    if (a.size() != 1) return false;
    const double h = 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(a(0)));
    const double lo = star_gradient(v_, q_, Point::Constant(1, a(0) - h))(0);
    const double hi = star_gradient(v_, q_, Point::Constant(1, a(0) + h))(0);
    return lo <= x(0) && x(0) <= hi;
  }

  const ConvexFunction& v_;
  const DiscreteMeasure& q_;
  ConvexFunction conj_;
};

Index nearest_atom(const DiscreteMeasure& m, const Point& y) {
  Index best = 0;
  double dist = kInf;
  for (Index j = 0; j < m.size(); ++j) {
    const double dj = (m.atom(j) - y).lpNorm<Eigen::Infinity>();
    if (dj < dist) {
      dist = dj;
      best = j;
    }
  }
  return best;
}

double pair_w2_mu(const BassPair& pair, const DiscreteMeasure& mu, const DiscreteMeasure& q) {
  const DiscreteMeasure image =
      pushforward(pair.alpha_hat, [&](const Point& a) { return star_gradient(pair.v_hat, q, a); });
  return wasserstein2(image, mu);
}

double pair_w2_nu(const BassPair& pair, const DiscreteMeasure& nu, const DiscreteMeasure& q) {
  const DiscreteMeasure image =
      pushforward(convolve(pair.alpha_hat, q), [&](const Point& y) { return grad_select(pair.v_hat, y); });
  return wasserstein2(image, nu);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Index sample_index(const std::vector<double>& cumulative, double u) {
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u * cumulative.back());
  return std::min<Index>(static_cast<Index>(it - cumulative.begin()), static_cast<Index>(cumulative.size()) - 1);
}

std::vector<double> cumulative_weights(const DiscreteMeasure& m) {
  std::vector<double> c(static_cast<size_t>(m.size()));
  double acc = 0.0;
  for (Index i = 0; i < m.size(); ++i) c[static_cast<size_t>(i)] = acc += m.weight(i);
  return c;
}

// Weighted pool-adjacent-violators: nondecreasing least-squares fit, returned
// as blocks [begin, end) with their means.
struct Block {
  Index begin, end;
  double weight, mean;
};

std::vector<Block> isotonic_blocks(const VectorXd& r, const VectorXd& w) {
  std::vector<Block> blocks;
  for (Index j = 0; j < r.size(); ++j) {
    blocks.push_back({j, j + 1, w(j), r(j)});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean >= blocks.back().mean) {
      Block b = blocks.back();
      blocks.pop_back();
      Block& a = blocks.back();
      const double wt = a.weight + b.weight;
      a.mean = (a.weight * a.mean + b.weight * b.mean) / wt;
      a.weight = wt;
      a.end = b.end;
    }
  }
  return blocks;
}

// Optimal partition of the (nondecreasing) block means into at most k
// contiguous segments by weighted least squares.
std::vector<Block> merge_blocks(const std::vector<Block>& blocks, int k) {
  const size_t B = blocks.size();
  if (B <= static_cast<size_t>(k)) return blocks;
  std::vector<double> sw(B + 1, 0.0), swm(B + 1, 0.0), swm2(B + 1, 0.0);
  for (size_t b = 0; b < B; ++b) {
    sw[b + 1] = sw[b] + blocks[b].weight;
    swm[b + 1] = swm[b] + blocks[b].weight * blocks[b].mean;
    swm2[b + 1] = swm2[b] + blocks[b].weight * blocks[b].mean * blocks[b].mean;
  }
  auto sse = [&](size_t i, size_t j) {  // blocks [i, j)
    const double w = sw[j] - sw[i], m = swm[j] - swm[i];
    return std::max(0.0, swm2[j] - swm2[i] - m * m / w);
  };
  const size_t K = static_cast<size_t>(k);
  std::vector<std::vector<double>> cost(K + 1, std::vector<double>(B + 1, kInf));
  std::vector<std::vector<size_t>> cut(K + 1, std::vector<size_t>(B + 1, 0));
  cost[0][0] = 0.0;
  for (size_t s = 1; s <= K; ++s) {
    for (size_t j = s; j <= B; ++j) {
      for (size_t i = s - 1; i < j; ++i) {
        if (cost[s - 1][i] == kInf) continue;
        const double c = cost[s - 1][i] + sse(i, j);
        if (c < cost[s][j]) {
          cost[s][j] = c;
          cut[s][j] = i;
        }
      }
    }
  }
  std::vector<Block> out(K);
  size_t j = B;
  for (size_t s = K; s >= 1; --s) {
    const size_t i = cut[s][j];
    const double w = sw[j] - sw[i];
    out[s - 1] = {blocks[i].begin, blocks[j - 1].end, w, (swm[j] - swm[i]) / w};
    j = i;
  }
  return out;
}

}  // namespace

Point star_gradient(const ConvexFunction& v, const DiscreteMeasure& q, const Point& y) {
  require_dimension(v.dim(), q.dim(), "star_gradient");
  Point acc = Point::Zero(y.size());
  for (Index k = 0; k < q.size(); ++k) acc += q.weight(k) * grad_select(v, y + q.atom(k));
  return acc;
}

Point invert_star_gradient(const ConvexFunction& v, const DiscreteMeasure& q, const Point& x) {
  require_dimension(v.dim(), x.size(), "invert_star_gradient");
  if (!v.is_smooth()) throw DomainError("invert_star_gradient: v must be smooth");
  return StarInverter(v, q)(x);
}

GeneratingReport check_generating(const ConvexFunction& v, const DiscreteMeasure& mu, const DiscreteMeasure& q,
                                  std::uint64_t seed) {
  GeneratingReport r;
  if (v.dim() != mu.dim() || q.dim() != mu.dim()) {
    r.message = "dimension mismatch between v, mu and q";
    return r;
  }
  const auto* smooth = v.as<SmoothQuadLSE>();
  const auto* affine = v.as<MaxAffine>();
  if (!smooth && !affine) {
    r.message = "representation " + v.type_name() + " is not a finite-valued generating candidate";
    return r;
  }

  // (i) int(dom v*) is everything when epsilon > 0, else the open hull of
  // the slopes.
  if (smooth && smooth->epsilon > 0.0) {
    r.interior_domain = true;
  } else {
    const PointSet& slopes = smooth ? smooth->slopes : affine->slopes;
    r.interior_domain = true;
    for (Index i = 0; i < mu.size() && r.interior_domain; ++i) {
      if (!in_interior_of_hull(slopes, mu.atom(i))) {
        r.interior_domain = false;
        r.message = "(i) mu atom " + fmt_point(mu.atom(i)) + " is not interior to dom v*";
      }
    }
  }

  // (ii) strict convexity margin and gradient exchange.
  r.strict_convexity_margin = smooth ? smooth->epsilon : 0.0;
  if (smooth) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    const double h = 1e-30;
    for (int s = 0; s < kExchangeSamples; ++s) {
      Point y = mu.atom(static_cast<Index>(rng() % static_cast<std::uint64_t>(mu.size())));
      for (Index c = 0; c < y.size(); ++c) y(c) += g(rng);
      Point lhs = Point::Zero(y.size());
      for (Index c = 0; c < y.size(); ++c) {
        for (Index k = 0; k < q.size(); ++k) {
          Eigen::VectorXcd yc = (y + q.atom(k)).cast<std::complex<double>>();
          yc(c) += std::complex<double>(0.0, h);
          lhs(c) += q.weight(k) * smooth_value(*smooth, yc).imag() / h;
        }
      }
      const Point rhs = star_gradient(v, q, y);
      r.exchange_residual = std::max(r.exchange_residual, (lhs - rhs).norm() / std::max(1.0, rhs.norm()));
    }
  } else {
    r.exchange_residual = std::numeric_limits<double>::quiet_NaN();
  }
  r.strictly_convex = r.strict_convexity_margin > 0.0 && r.exchange_residual <= 1e-8;
  if (!r.strictly_convex && r.message.empty()) {
    r.message = "(ii) v star q is not certified strictly convex (margin " + fmt(r.strict_convexity_margin) + ")";
  }

  // (iii) nu^v is finitely supported once alpha is.
  r.finite_second_moment = true;
  return r;
}

BassGeneration generate_from_v(const ConvexFunction& v, const DiscreteMeasure& mu, const DiscreteMeasure& q) {
  if (!v.as<SmoothQuadLSE>()) throw DomainError("generate_from_v: v must be a smooth_quad_lse potential");
  const GeneratingReport report = check_generating(v, mu, q);
  if (!report.ok()) throw DomainError("generate_from_v: v is not generating: " + report.message);

  const StarInverter inverse(v, q);
  PointSet pre(mu.dim(), mu.size());
  for (Index i = 0; i < mu.size(); ++i) pre.col(i) = inverse(mu.atom(i));

  DiscreteMeasure alpha(pre, mu.weights());
  DiscreteMeasure nu = pushforward(convolve(alpha, q), [&](const Point& y) { return grad_select(v, y); });

  MatrixXd rows = MatrixXd::Zero(mu.size(), nu.size());
  for (Index i = 0; i < mu.size(); ++i) {
    for (Index k = 0; k < q.size(); ++k) {
      rows(i, nearest_atom(nu, grad_select(v, pre.col(i) + q.atom(k)))) += q.weight(k);
    }
  }
  BassGeneration out{BassPair{v, std::move(alpha), {}}, nu, MartingaleKernel{mu, nu.atoms(), rows}, pre};
  out.pair.diagnostics.strict_convexity_margin = report.strict_convexity_margin;
  out.pair.diagnostics.w2_mu = pair_w2_mu(out.pair, mu, q);
  out.pair.diagnostics.w2_nu = pair_w2_nu(out.pair, out.nu, q);
  return out;
}

BassVerification verify_bass(const BassPair& pair, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                             const DiscreteMeasure& q, double tol) {
  require_dimension(mu.dim(), pair.v_hat.dim(), "verify_bass");
  require_dimension(nu.dim(), pair.v_hat.dim(), "verify_bass");
  require_dimension(q.dim(), pair.v_hat.dim(), "verify_bass");
  BassVerification out;
  out.w2_mu = pair_w2_mu(pair, mu, q);
  out.w2_nu = pair_w2_nu(pair, nu, q);
  if (pair.v_hat.is_smooth()) {
    const StarInverter inverse(pair.v_hat, q);
    for (Index i = 0; i < mu.size(); ++i) {
      try {
        const Point a = inverse(mu.atom(i));
        out.barycenter_residual =
            std::max(out.barycenter_residual, (star_gradient(pair.v_hat, q, a) - mu.atom(i)).norm());
      } catch (const DomainError&) {
        out.barycenter_residual = kInf;
      }
    }
  } else {
    out.barycenter_residual = kInf;
  }
  out.passed = out.w2_mu <= tol && out.w2_nu <= tol && out.barycenter_residual <= tol;
  return out;
}

PathTable simulate(const BassPair& pair, const DiscreteMeasure& q, long n_paths, std::uint64_t seed) {
  if (n_paths <= 0) throw DomainError("simulate: n_paths must be positive");
  require_dimension(q.dim(), pair.v_hat.dim(), "simulate");
  const DiscreteMeasure& alpha = pair.alpha_hat;
  const Index d = alpha.dim();
  const Index n = n_paths;

  PointSet x0_table(d, alpha.size());
  std::vector<PointSet> x1_table(static_cast<size_t>(alpha.size()), PointSet(d, q.size()));
  for (Index i = 0; i < alpha.size(); ++i) {
    x0_table.col(i) = star_gradient(pair.v_hat, q, alpha.atom(i));
    for (Index k = 0; k < q.size(); ++k) {
      x1_table[static_cast<size_t>(i)].col(k) = grad_select(pair.v_hat, alpha.atom(i) + q.atom(k));
    }
  }
  const std::vector<double> ca = cumulative_weights(alpha), cq = cumulative_weights(q);

  PathTable t{PointSet(d, n), PointSet(d, n), PointSet(d, n), PointSet(d, n),
              std::vector<Index>(static_cast<size_t>(n))};
  const Index chunks = (n + kChunk - 1) / kChunk;
  auto run_chunk = [&](Index c) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(static_cast<std::uint64_t>(c) >> 32)};
    std::mt19937_64 rng(seq);
    for (Index p = c * kChunk; p < std::min(n, (c + 1) * kChunk); ++p) {
      const Index i = sample_index(ca, uniform01(rng));
      const Index k = sample_index(cq, uniform01(rng));
      t.alpha_index[static_cast<size_t>(p)] = i;
      t.a.col(p) = alpha.atom(i);
      t.z.col(p) = q.atom(k);
      t.x0.col(p) = x0_table.col(i);
      t.x1.col(p) = x1_table[static_cast<size_t>(i)].col(k);
    }
  };
  const Index workers = std::max<Index>(1, std::min<Index>(chunks, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (Index w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (Index c = w; c < chunks; c += workers) run_chunk(c);
    });
  }
  for (auto& th : pool) th.join();
  return t;
}

SmoothQuadLSE fit_monotone_gradient(const VectorXd& x, const VectorXd& target, const VectorXd& weights, int pieces,
                                    double epsilon, double max_beta) {
  if (x.size() == 0 || x.size() != target.size() || x.size() != weights.size()) {
    throw DomainError("fit_monotone_gradient: inconsistent input sizes");
  }
  if (pieces < 1 || !(epsilon >= 0.0) || !(max_beta > 0.0)) {
    throw DomainError("fit_monotone_gradient: need pieces >= 1, epsilon >= 0, beta > 0");
  }
  const VectorXd r = target - epsilon * x;
  std::vector<Block> segs = merge_blocks(isotonic_blocks(r, weights), pieces);

  const Index L = static_cast<Index>(segs.size());
  SmoothQuadLSE f;
  f.epsilon = epsilon;
  f.slopes.resize(1, L);
  f.intercepts.resize(L);
  double beta = max_beta;
  double intercept = 0.0;
  for (Index l = 0; l < L; ++l) {
    f.slopes(0, l) = segs[static_cast<size_t>(l)].mean;
    if (l > 0) {
      const double left = x(segs[static_cast<size_t>(l - 1)].end - 1);
      const double right = x(segs[static_cast<size_t>(l)].begin);
      const double jump = f.slopes(0, l) - f.slopes(0, l - 1);
      intercept -= jump * 0.5 * (left + right);
      // exp(-36) keeps the neighbouring piece below double rounding at the
      // closest atom on either side.
      if (jump > 0.0) beta = std::min(beta, jump * 0.5 * (right - left) / 36.0);
    }
    f.intercepts(l) = intercept;
  }
  // Below ~1e-6 the rounding of <s, y> + b, amplified by 1 / beta, makes the
  // gradient too noisy to invert to 1e-10.
  f.beta = std::max(beta, std::min(max_beta, kMinFitBeta));
  return f;
}

FixedPointResult fixed_point_solve(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const DiscreteMeasure& q,
                                   const FixedPointConfig& config) {
  if (mu.dim() != 1 || nu.dim() != 1 || q.dim() != 1) {
    throw DomainError("fixed_point_solve: only d = 1 is supported");
  }
  if (!(config.tol > 0.0) || config.max_iter < 1 || config.pieces < 1 || !(config.epsilon > 0.0) ||
      !(config.beta > 0.0) || !(config.init_jitter >= 0.0)) {
    throw DomainError("fixed_point_solve: need tol > 0, max_iter >= 1, pieces >= 1, epsilon > 0, beta > 0");
  }
  if (nu.size() == 1 && mu.size() > 1) {
    throw DomainError("fixed_point_solve: degenerate nu (single atom) with non-Dirac mu");
  }
  if (!check_convex_order(mu, nu).ordered) throw DomainError("fixed_point_solve: not in convex order");

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> g(0.0, 1.0);
  PointSet start = mu.atoms();
  for (Index i = 0; i < start.cols(); ++i) start(0, i) += config.init_jitter * g(rng);
  DiscreteMeasure alpha(start, mu.weights());

  FixedPointResult out{BassPair{half_square(), alpha, {}}, false, {}, 0};
  for (long it = 0; it < config.max_iter; ++it) {
    const DiscreteMeasure beta = convolve(alpha, q);
    const BarycentricMap T = brenier_map(beta, nu);
    const ConvexFunction v = fit_monotone_gradient(beta.atoms().row(0).transpose(), T.image().row(0).transpose(),
                                                   beta.weights(), config.pieces, config.epsilon, config.beta);
    const StarInverter inverse(v, q);
    try {
      alpha = pushforward(mu, [&](const Point& x) { return inverse(x); });
    } catch (const DomainError& e) {
      spdlog::warn("fixed_point_solve: stopping at iteration {}: {}", it, e.what());
      break;
    }

    out.pair = BassPair{v, alpha, {}};
    out.pair.diagnostics.w2_mu = pair_w2_mu(out.pair, mu, q);
    out.pair.diagnostics.w2_nu = pair_w2_nu(out.pair, nu, q);
    out.pair.diagnostics.strict_convexity_margin = config.epsilon;
    const double residual = out.pair.diagnostics.w2_mu + out.pair.diagnostics.w2_nu;
    out.residuals.push_back(residual);
    out.iterations = it + 1;
    spdlog::debug("fixed_point_solve: iteration {} residual {}", it, residual);
    if (residual <= config.tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace qbass
