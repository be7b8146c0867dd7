// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "oracles.hpp"
#include "qbass/bass.hpp"
#include "qbass/gaussian.hpp"
#include "qbass/ot.hpp"
#include "qbass/solver.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

using namespace qbass;
using Eigen::Index;
using Eigen::VectorXd;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

DualPotential random_convex_potential(std::mt19937_64& rng, const DiscreteMeasure& nu) {
  std::normal_distribution<double> g(0.0, 1.0);
  const Index k = 1 + static_cast<Index>(rng() % 6);
  MaxAffine f{PointSet(nu.dim(), k), VectorXd(k)};
  for (Index i = 0; i < k; ++i) {
    for (Index r = 0; r < nu.dim(); ++r) f.slopes(r, i) = 2.0 * g(rng);
    f.intercepts(i) = g(rng);
  }
  // Adding a random nonnegative quadratic keeps psi convex but not piecewise affine.
  const double c = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  DualPotential raw = DualPotential::restrict(f, nu.atoms());
  VectorXd v = raw.values();
  for (Index j = 0; j < nu.size(); ++j) v(j) += 0.5 * c * nu.atom(j).squaredNorm();
  return DualPotential(nu.atoms(), v);
}

SmoothQuadLSE random_potential(std::mt19937_64& rng, Index d) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SmoothQuadLSE f;
  f.epsilon = 0.05 + 0.5 * u(rng);
  f.beta = 0.1 + 0.4 * u(rng);
  const Index k = 2 + static_cast<Index>(rng() % 4);
  f.slopes = PointSet(d, k);
  f.intercepts = VectorXd(k);
  for (Index i = 0; i < k; ++i) {
    for (Index r = 0; r < d; ++r) f.slopes(r, i) = 1.5 * g(rng);
    f.intercepts(i) = 0.5 * g(rng);
  }
  return f;
}

// Asymmetric two-sided exponential: mass 0.4 on the left with rate 1, rate
// 2.5 on the right; atoms at the midpoint quantiles.
DiscreteMeasure quantize_two_sided_exponential(int m) {
  const double left = 0.4, a = 1.0, b = 2.5;
  std::vector<double> atoms, weights;
  for (int k = 1; k <= m; ++k) {
    const double u = (k - 0.5) / m;
    atoms.push_back(u < left ? std::log(u / left) / a : -std::log((1.0 - u) / (1.0 - left)) / b);
    weights.push_back(1.0 / m);
  }
  return DiscreteMeasure::from_1d(atoms, weights);
}

DiscreteMeasure product(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  PointSet atoms(2, a.size() * b.size());
  VectorXd w(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i) {
    for (Index j = 0; j < b.size(); ++j) {
      atoms(0, i * b.size() + j) = a.atoms()(0, i);
      atoms(1, i * b.size() + j) = b.atoms()(0, j);
      w(i * b.size() + j) = a.weight(i) * b.weight(j);
    }
  }
  return DiscreteMeasure::normalized(atoms, w);
}

double integral(const ConvexFunction& f, const DiscreteMeasure& p) {
  double s = 0.0;
  for (Index j = 0; j < p.size(); ++j) s += p.weight(j) * evaluate(f, p.atom(j));
  return s;
}

struct Verdict {
  bool pass;
  std::string detail;
};

char buf[512];

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Verdict duality() {
  const auto start = Clock::now();
  std::mt19937_64 rng(1001);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const auto pair = testing::martingale_split_1d(rng, 1 + static_cast<Index>(rng() % 5), 8);
    const auto q = testing::random_measure(rng, 1 + static_cast<Index>(rng() % 8), 1);
    const double lp = solve_primal_lp(pair.mu, pair.nu, q).value;
    const double dual = solve_dual(pair.mu, pair.nu, q).value;
    worst = std::max(worst, std::abs(dual - lp));
  }
  const double elapsed = seconds_since(start);
  return {worst <= 1e-4 && elapsed < 60.0, fmt("max |dual - LP| = %.2e over 50 instances, %.1f s", worst, elapsed)};
}

Verdict weak_duality() {
  std::mt19937_64 rng(1002);
  long violations = 0, checks = 0;
  double min_slack = kInf;
  for (int t = 0; t < 50; ++t) {
    const auto pair = testing::martingale_split_1d(rng, 1 + static_cast<Index>(rng() % 5), 8);
    const auto q = testing::random_measure(rng, 1 + static_cast<Index>(rng() % 8), 1);
    const auto primal = solve_primal_lp(pair.mu, pair.nu, q);
    for (int i = 0; i < 100; ++i) {
      const auto psi = random_convex_potential(rng, pair.nu);
      const double e = dual_value_relaxed(psi, pair.mu, pair.nu, q, primal.kernel);
      min_slack = std::min(min_slack, e - primal.value);
      ++checks;
      if (e < primal.value - 1e-7) ++violations;
    }
  }
  return {violations == 0, fmt("%ld violations in %ld potentials, min slack %.2e", violations, checks, min_slack)};
}

Verdict bass_closure() {
  std::mt19937_64 rng(1003);
  int failures = 0;
  double worst_verify = 0.0, worst_kernel = 0.0, worst_dual = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Index d = t < 14 ? 1 : 2;
    const bool gaussian = t % 2 == 0;
    DiscreteMeasure q = gaussian ? quantize_gaussian(8, 1.0) : quantize_two_sided_exponential(8);
    if (d == 2) {
      q = gaussian ? product(quantize_gaussian(3, 1.0), quantize_gaussian(3, 0.7))
                   : product(quantize_two_sided_exponential(3), quantize_gaussian(3, 1.0));
    }
    const auto mu = testing::random_measure(rng, 2 + static_cast<Index>(rng() % (d == 1 ? 3 : 2)), d);
    const ConvexFunction v = random_potential(rng, d);
    const auto g = generate_from_v(v, mu, q);
    const auto ver = verify_bass(g.pair, mu, g.nu, q, 1e-7);
    worst_verify = std::max({worst_verify, ver.w2_mu, ver.w2_nu, ver.barycenter_residual});
    double kernel_value = 0.0;
    for (Index i = 0; i < mu.size(); ++i) kernel_value += mu.weight(i) * mcov(g.kernel.row_measure(i), q).value;
    const double lp = solve_primal_lp(mu, g.nu, q).value;
    const auto psi = DualPotential::restrict(conjugate(v), g.nu.atoms());
    const double dual = dual_objective(psi, mu, g.nu, q).value;
    worst_kernel = std::max(worst_kernel, std::abs(kernel_value - lp));
    worst_dual = std::max(worst_dual, std::abs(dual - lp));
    if (!ver.passed || std::abs(kernel_value - lp) > 1e-6 || std::abs(dual - lp) > 1e-5) ++failures;
  }
  return {failures == 0, fmt("%d/20 failed; worst verify residual %.1e, |kernel - LP| %.1e, |dual - LP| %.1e",
                             failures, worst_verify, worst_kernel, worst_dual)};
}

Verdict phi_oracle() {
  std::mt19937_64 rng(1004);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  long violations = 0;
  double worst_gap = 0.0;
  for (int t = 0; t < 8; ++t) {
    const Index d = 1 + t % 2;
    const SmoothQuadLSE vf = random_potential(rng, d);
    const ConvexFunction v = vf;
    const ConvexFunction psi = conjugate(v);
    const auto q = d == 1 ? quantize_gaussian(12, 1.0) : product(quantize_gaussian(3, 1.0), quantize_gaussian(3, 1.0));
    const double top = phi_unconstrained(psi, q);
    for (int i = 0; i < 1000; ++i) {
      const auto p = testing::random_measure(rng, 1 + static_cast<Index>(rng() % 6), d, 3.0);
      if (top < mcov(p, q).value - integral(psi, p) - 1e-9) ++violations;
    }
    // p_hat = grad v (q) attains the supremum.
    const auto p_hat = pushforward(q, [&](const Point& z) { return grad_select(v, z); });
    worst_gap = std::max(worst_gap, std::abs(top - (mcov(p_hat, q).value - integral(psi, p_hat))));
  }
  return {violations == 0 && worst_gap <= 1e-6,
          fmt("%ld domination violations in 8000 draws, max |phi - value at p_hat| = %.1e", violations, worst_gap)};
}

Verdict gaussian_sanity() {
  std::mt19937_64 rng(1005);
  double worst = 0.0;
  for (int m : {10, 50, 100}) {
    const auto q = quantize_gaussian(m, 1.0);
    const auto mu = testing::random_measure(rng, 4, 1);
    const auto g = generate_from_v(half_square(), mu, q);
    if (!approx_equal(g.pair.alpha_hat, mu, 1e-10) || !approx_equal(g.nu, convolve(mu, q), 1e-10)) worst = kInf;
  }
  const auto q = quantize_gaussian(200, 1.0);
  const auto dirac = DiscreteMeasure::dirac(Point::Zero(1));
  double forced = 0.0, continuum = 0.0;
  for (double sigma : {0.5, 1.0}) {
    const auto nu = quantize_gaussian(200, sigma);
    const double p = solve_primal_lp(dirac, nu, q).value;
    forced = std::max(forced, std::abs(p - mcov(nu, q).value));
    continuum = std::max(continuum, std::abs(p - sigma));
  }
  const bool pass = worst == 0.0 && forced <= 1e-9 && continuum <= 1e-2;
  return {pass, fmt("alpha = mu, nu = mu * q within 1e-10; |P - MCov| = %.1e; |P - sigma| = %.2e (sigma = 0.5, 1)",
                    forced, continuum)};
}

Verdict martingale_simulation() {
  std::mt19937_64 rng(1006);
  const auto q = quantize_gaussian(50, 1.0);
  const auto mu = testing::random_measure(rng, 5, 1);
  const auto g = generate_from_v(random_potential(rng, 1), mu, q);
  long within = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto paths = simulate(g.pair, q, 10000, seed);
    for (Index i = 0; i < g.pair.alpha_hat.size(); ++i) {
      double n = 0, s = 0, s2 = 0, x0 = 0;
      for (Index p = 0; p < paths.size(); ++p) {
        if (paths.alpha_index[static_cast<size_t>(p)] != i) continue;
        const double x1 = paths.x1(0, p);
        x0 = paths.x0(0, p);
        n += 1;
        s += x1;
        s2 += x1 * x1;
      }
      if (n < 2) continue;
      const double mean = s / n;
      const double se = std::sqrt(std::max(0.0, (s2 - n * mean * mean) / (n - 1)) / n);
      ++total;
      if (std::abs(mean - x0) <= 3.0 * se) ++within;
    }
  }
  const double frac = static_cast<double>(within) / static_cast<double>(total);
  return {frac >= 0.95, fmt("%ld/%ld atom-seed pairs within 3 SE (%.1f%%)", within, total, 100 * frac)};
}

Verdict mcov_cross() {
  std::mt19937_64 rng(1007);
  double worst1 = 0.0, worst2 = 0.0;
  for (int t = 0; t < 200; ++t) {
    const auto p = testing::random_measure(rng, 1 + static_cast<Index>(rng() % 9), 1);
    const auto r = testing::random_measure(rng, 1 + static_cast<Index>(rng() % 9), 1);
    Eigen::MatrixXd cost(p.size(), r.size());
    for (Index i = 0; i < p.size(); ++i) {
      for (Index j = 0; j < r.size(); ++j) cost(i, j) = -p.atom(i).dot(r.atom(j));
    }
    const double lp = -testing::transport_via_general_lp(cost, p.weights(), r.weights());
    worst1 = std::max(worst1, std::abs(mcov(p, r, CouplingMethod::Comonotone).value - lp));
  }
  for (int t = 0; t < 60; ++t) {
    const Index n = 1 + t % 6;
    const auto p = testing::random_equal_weight(rng, n, 2);
    const auto r = testing::random_equal_weight(rng, n, 2);
    if (p.size() != n || r.size() != n) continue;
    worst2 = std::max(worst2, std::abs(mcov(p, r).value - testing::mcov_permutation_bruteforce(p.atoms(), r.atoms())));
  }
  return {worst1 <= 1e-9 && worst2 <= 1e-9,
          fmt("1D comonotone vs LP max %.1e (200 instances); 2D vs permutations max %.1e (60 instances)", worst1, worst2)};
}

Verdict fixed_point() {
  const auto mu = DiscreteMeasure::dirac(Point::Zero(1));
  const auto nu = DiscreteMeasure::from_1d({-1, 1}, {0.5, 0.5});
  const auto q = quantize_gaussian(100, 1.0);
  int good = 0, converged = 0, vacuous = 0;
  long max_iterations = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    FixedPointConfig config;
    config.seed = seed;
    const auto r = fixed_point_solve(mu, nu, q, config);
    max_iterations = std::max(max_iterations, r.iterations);
    bool monotone = true;
    for (size_t i = 11; i < r.residuals.size(); ++i) monotone = monotone && r.residuals[i] <= r.residuals[i - 1];
    if (r.residuals.size() <= 11) ++vacuous;
    const bool verified = r.converged && verify_bass(r.pair, mu, nu, q, 5e-2).passed;
    converged += r.converged;
    if (verified && monotone) ++good;
  }
  return {good >= 18, fmt("%d/20 seeds converged, verified at 5e-2 and monotone after iteration 10 (%d converged; "
                          "max %ld iterations, so monotonicity was vacuous for %d seeds)",
                          good, converged, max_iterations, vacuous)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"duality: solve_dual matches the LP primal", duality},
      {"weak duality of the relaxed dual", weak_duality},
      {"generated Bass pairs close primal and dual", bass_closure},
      {"phi_unconstrained dominates and is attained at grad v(q)", phi_oracle},
      {"Gaussian sanity", gaussian_sanity},
      {"martingale property of simulated paths", martingale_simulation},
      {"maximal covariance across implementations", mcov_cross},
      {"fixed-point pipeline on a Dirac initial law", fixed_point},
  };
  int failed = 0;
  for (size_t k = 0; k < criteria.size(); ++k) {
    Verdict v{false, ""};
    const auto start = Clock::now();
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %zu: %s  %s [%s] (%.2f s)\n", k + 1, v.pass ? "PASS" : "FAIL", criteria[k].first,
                v.detail.c_str(), seconds_since(start));
    std::fflush(stdout);
    failed += !v.pass;
  }
  return failed == 0 ? 0 : 1;
}
