#include "qbass/solver.hpp"

#include "barycentric_lp.hpp"
#include "qbass/lp.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace qbass {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

PrimalResult solve_primal_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                             const DiscreteMeasure& q, const PrimalOptions& options) {
  require_dimension(mu.dim(), nu.dim(), "solve_primal_lp");
  require_dimension(mu.dim(), q.dim(), "solve_primal_lp");
  const Index m = mu.size();
  const Index n = nu.size();
  const Index K = q.size();
  if (m * n * K > options.max_variables) {
    throw DomainError("solve_primal_lp: " + std::to_string(m * n * K) +
                      " joint variables exceed the size guard of " +
                      std::to_string(options.max_variables));
  }
  auto var = [&](Index i, Index j, Index k) { return (i * n + j) * K + k; };

  lp::ProblemBuilder builder(m * n * K);
  for (Index i = 0; i < m; ++i) {
    for (Index k = 0; k < K; ++k) {
      const Index r = builder.add_row(mu.weight(i) * q.weight(k));
      for (Index j = 0; j < n; ++j) builder.add(r, var(i, j, k), 1.0);
    }
  }
  for (Index i = 0; i < m; ++i) {
    for (Index d = 0; d < mu.dim(); ++d) {
      const Index r = builder.add_row(0.0);
      for (Index j = 0; j < n; ++j) {
        const double shift = nu.atoms()(d, j) - mu.atoms()(d, i);
        for (Index k = 0; k < K; ++k) builder.add(r, var(i, j, k), shift);
      }
    }
  }
  for (Index j = 0; j < n; ++j) {
    const Index r = builder.add_row(nu.weight(j));
    for (Index i = 0; i < m; ++i) {
      for (Index k = 0; k < K; ++k) builder.add(r, var(i, j, k), 1.0);
    }
  }
  const MatrixXd inner = nu.atoms().transpose() * q.atoms();  // <y_j, z_k>
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) {
      for (Index k = 0; k < K; ++k) builder.set_cost(var(i, j, k), -inner(j, k));
    }
  }

  const lp::Result res = lp::solve(builder.build());
  if (res.status == lp::Status::Infeasible) {
    throw DomainError("solve_primal_lp: not in convex order (martingale LP infeasible)");
  }
  if (res.status != lp::Status::Optimal) {
    throw DomainError(std::string("solve_primal_lp: LP ") + lp::to_string(res.status));
  }

  PrimalResult out{-res.objective, MartingaleKernel{mu, nu.atoms(), MatrixXd::Zero(m, n)}, {},
                   res.iterations};
  for (Index i = 0; i < m; ++i) {
    MatrixXd block(n, K);
    for (Index j = 0; j < n; ++j) {
      for (Index k = 0; k < K; ++k) block(j, k) = res.x(var(i, j, k)) / mu.weight(i);
    }
    out.kernel.rows.row(i) = block.rowwise().sum().transpose();
    std::vector<Index> charged;
    for (Index j = 0; j < n; ++j) {
      if (out.kernel.rows(i, j) > 0.0) charged.push_back(j);
    }
    PointSet atoms(nu.dim(), static_cast<Index>(charged.size()));
    VectorXd weights(static_cast<Index>(charged.size()));
    MatrixXd mass(static_cast<Index>(charged.size()), K);
    for (size_t c = 0; c < charged.size(); ++c) {
      const auto r = static_cast<Index>(c);
      atoms.col(r) = nu.atom(charged[c]);
      weights(r) = out.kernel.rows(i, charged[c]);
      mass.row(r) = block.row(charged[c]);
    }
    out.conditional_couplings.push_back(
        Coupling{DiscreteMeasure::normalized(atoms, weights), q, mass});
  }
  return out;
}

DualPotential::DualPotential(PointSet support, VectorXd values)
    : values_fn_{std::move(support), std::move(values)} {
  // Validates shape and distinctness through the ConvexFunction constructor.
  ConvexFunction check(values_fn_);
  conjugate_ = MaxAffine{values_fn_.points, -values_fn_.values};
}

DualPotential DualPotential::restrict(const ConvexFunction& f, const PointSet& support) {
  VectorXd v(support.cols());
  for (Index j = 0; j < support.cols(); ++j) {
    v(j) = evaluate(f, support.col(j));
    if (!std::isfinite(v(j))) throw DomainError("dual potential: infinite value on the support");
  }
  return DualPotential(support, v);
}

namespace {

PhiResult phi_psi_1d(const DualPotential& psi, const DiscreteMeasure& q, double x) {
  const AffineEnvelope1d env = upper_envelope_1d(psi.conjugate());
  const size_t L = env.slopes.size();
  const Index K = q.size();
  const VectorXd z = q.atoms().row(0).transpose();
  const double scale = std::max({1.0, std::abs(env.slopes.front()), std::abs(env.slopes.back())});
  const double tol = 1e-12 * scale;
  if (x < env.slopes.front() - tol || x > env.slopes.back() + tol) {
    throw DomainError("phi_psi: x outside the convex hull of the potential's support; phi is -inf");
  }

  // g(y) = sum_k u_k max_l (s_l (y + z_k) + c_l): piecewise affine, breakpoints
  // at breaks[l] - z_k, slope increment u_k (s_{l+1} - s_l) at each.
  struct Event {
    double at;
    Index k;
    size_t l;
  };
  std::vector<Event> events;
  events.reserve(static_cast<size_t>(K) * (L - 1));
  for (Index k = 0; k < K; ++k) {
    for (size_t l = 0; l + 1 < L; ++l) events.push_back({env.breaks[l] - z(k), k, l});
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.at < b.at; });

  auto g_at = [&](double y) {
    double acc = 0.0;
    for (Index k = 0; k < K; ++k) {
      double best = -kInf;
      for (size_t l = 0; l < L; ++l) best = std::max(best, env.slopes[l] * (y + z(k)) + env.intercepts[l]);
      acc += q.weight(k) * best;
    }
    return acc;
  };
  auto piece_at = [&](double w) {
    return static_cast<size_t>(std::upper_bound(env.breaks.begin(), env.breaks.end(), w) - env.breaks.begin());
  };

  PhiResult out;
  out.p_hat = VectorXd::Zero(psi.size());
  out.y_hat = Point::Zero(1);

  // Left or right end of the hull: the optimal p is the Dirac at x.
  const bool left_end = x <= env.slopes.front() + tol;
  const bool right_end = x >= env.slopes.back() - tol;
  if (left_end || right_end) {
    const size_t l = left_end ? 0 : L - 1;
    double b = 0.0;
    if (!events.empty()) b = left_end ? events.front().at : events.back().at;
    out.y_hat(0) = b;
    out.value = env.slopes[l] * b - g_at(b);
    out.p_hat(env.source[l]) = 1.0;
    return out;
  }

  double slope = env.slopes.front();
  for (size_t e = 0; e < events.size();) {
    const size_t first = e;
    const double at = events[e].at;
    double next = slope;
    for (; e < events.size() && events[e].at == at; ++e) {
      const Event& ev = events[e];
      next += q.weight(ev.k) * (env.slopes[ev.l + 1] - env.slopes[ev.l]);
    }
    if (next < x) {
      slope = next;
      continue;
    }
    // Maximizer at this breakpoint: split the tied atoms so bary(p_hat) = x.
    const double theta = next > slope ? std::clamp((x - slope) / (next - slope), 0.0, 1.0) : 1.0;
    std::vector<bool> tied(static_cast<size_t>(K), false);
    for (size_t t = first; t < e; ++t) {
      const Event& ev = events[t];
      tied[static_cast<size_t>(ev.k)] = true;
      out.p_hat(env.source[ev.l]) += (1.0 - theta) * q.weight(ev.k);
      out.p_hat(env.source[ev.l + 1]) += theta * q.weight(ev.k);
    }
    for (Index k = 0; k < K; ++k) {
      if (tied[static_cast<size_t>(k)]) continue;
      out.p_hat(env.source[piece_at(at + z(k))]) += q.weight(k);
    }
    out.y_hat(0) = at;
    out.value = x * at - g_at(at);
    return out;
  }
  throw DomainError("phi_psi: breakpoint sweep failed to bracket x");
}

}  // namespace

PhiResult phi_psi(const DualPotential& psi, const DiscreteMeasure& q, const Point& x) {
  require_dimension(psi.dim(), q.dim(), "phi_psi");
  require_dimension(psi.dim(), x.size(), "phi_psi");
  if (psi.dim() == 1) return phi_psi_1d(psi, q, x(0));

  const Index K = q.size();
  const Index n = psi.size();
  MatrixXd cost(K, n);
  for (Index k = 0; k < K; ++k) {
    for (Index j = 0; j < n; ++j) cost(k, j) = psi.values()(j) - psi.support().col(j).dot(q.atom(k));
  }
  const auto res = detail::barycentric_lp(cost, q.weights(), psi.support(), x);
  if (!res.feasible) {
    throw DomainError("phi_psi: x outside the convex hull of the potential's support; phi is -inf");
  }
  PhiResult out;
  out.value = res.value;
  out.y_hat = res.multiplier;
  out.p_hat = res.lambda.colwise().sum().transpose().cwiseMax(0.0);
  return out;
}

double phi_unconstrained(const ConvexFunction& psi, const DiscreteMeasure& q) {
  require_dimension(psi.dim(), q.dim(), "phi_unconstrained");
  const ConvexFunction conj = conjugate(psi);
  double acc = 0.0;
  for (Index k = 0; k < q.size(); ++k) {
    const double v = evaluate(conj, q.atom(k));
    if (v == kInf) return kInf;
    acc += q.weight(k) * v;
  }
  return acc;
}

double phi_unconstrained(const DualPotential& psi, const DiscreteMeasure& q) {
  require_dimension(psi.dim(), q.dim(), "phi_unconstrained");
  const ConvexFunction conj = psi.conjugate();
  double acc = 0.0;
  for (Index k = 0; k < q.size(); ++k) acc += q.weight(k) * evaluate(conj, q.atom(k));
  return acc;
}

double dual_value_relaxed(const DualPotential& psi, const DiscreteMeasure& mu,
                          const DiscreteMeasure& nu, const DiscreteMeasure& q,
                          const MartingaleKernel& kernel) {
  require_dimension(mu.dim(), nu.dim(), "dual_value_relaxed");
  if (kernel.rows.rows() != mu.size() || kernel.rows.cols() != psi.size()) {
    throw DomainError("dual_value_relaxed: kernel shape does not match mu and the potential");
  }
  if ((kernel.target - psi.support()).lpNorm<Eigen::Infinity>() > 1e-9) {
    throw DomainError("dual_value_relaxed: kernel target differs from the potential's support");
  }
  double acc = 0.0;
  for (Index i = 0; i < mu.size(); ++i) {
    const double integral = kernel.rows.row(i).dot(psi.values());
    acc += mu.weight(i) * (integral - phi_psi(psi, q, mu.atom(i)).value);
  }
  return acc;
}

DualEvaluation dual_objective(const DualPotential& psi, const DiscreteMeasure& mu,
                              const DiscreteMeasure& nu, const DiscreteMeasure& q) {
  if ((nu.atoms() - psi.support()).lpNorm<Eigen::Infinity>() > 1e-9) {
    throw DomainError("dual_objective: potential must live on the support of nu");
  }
  DualEvaluation out;
  out.value = nu.weights().dot(psi.values());
  out.subgradient = nu.weights();
  for (Index i = 0; i < mu.size(); ++i) {
    const PhiResult phi = phi_psi(psi, q, mu.atom(i));
    out.value -= mu.weight(i) * phi.value;
    out.subgradient -= mu.weight(i) * phi.p_hat;
  }
  return out;
}

DualResult solve_dual(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const DiscreteMeasure& q,
                      const DualConfig& config) {
  require_dimension(mu.dim(), nu.dim(), "solve_dual");
  require_dimension(mu.dim(), q.dim(), "solve_dual");
  if (!(config.gap_tol > 0.0) || config.max_iter < 1) {
    throw DomainError("solve_dual: gap_tol must be > 0 and max_iter >= 1");
  }
  double target = std::numeric_limits<double>::quiet_NaN();
  if (config.use_primal_target) {
    target = solve_primal_lp(mu, nu, q).value;
  } else if (!check_convex_order(mu, nu).ordered) {
    throw DomainError("solve_dual: not in convex order");
  }

  VectorXd values = 0.5 * nu.atoms().colwise().squaredNorm().transpose();
  values.array() -= values(0);
  DualResult best{kInf, DualPotential(nu.atoms(), values), 0, kInf, target};

  long it = 0;
  for (; it < config.max_iter; ++it) {
    const DualPotential psi(nu.atoms(), values);
    const DualEvaluation eval = dual_objective(psi, mu, nu, q);
    if (eval.value < best.value) {
      best.value = eval.value;
      best.psi = psi;
    }
    if (config.use_primal_target && best.value - target <= config.gap_tol) break;
    const double norm2 = eval.subgradient.squaredNorm();
    if (norm2 <= 1e-30) break;  // zero subgradient: psi is optimal
    double step;
    if (config.use_primal_target) {
      step = std::max(eval.value - target, 0.0) / norm2;
      if (step == 0.0) break;
    } else {
      step = config.step0 / (std::sqrt(static_cast<double>(it) + 1.0) * std::sqrt(norm2));
    }
    values -= step * eval.subgradient;
    values.array() -= values(0);
  }
  best.iterations = it;
  best.gap = config.use_primal_target ? best.value - target : std::numeric_limits<double>::quiet_NaN();
  spdlog::debug("solve_dual: {} iterations, value {}, gap {}", it, best.value, best.gap);
  return best;
}

}  // namespace qbass
