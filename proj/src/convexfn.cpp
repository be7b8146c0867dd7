#include "qbass/convexfn.hpp"

#include "barycentric_lp.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace qbass {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::string fmt_residual(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", r);
  return buf;
}

constexpr double kTieTol = 1e-12;
constexpr double kInnerTol = 1e-10;
constexpr int kInnerMaxIter = 200;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_pieces(const PointSet& s, const VectorXd& b, const char* what) {
  if (s.cols() < 1) throw SchemaError(std::string(what) + ": needs at least one piece");
  if (s.cols() != b.size()) throw SchemaError(std::string(what) + ": slopes/intercepts size mismatch");
  if (!s.allFinite() || !b.allFinite()) throw SchemaError(std::string(what) + ": non-finite data");
}

void check_points(const PointSet& p, const VectorXd& v, const char* what) {
  if (p.cols() < 1) throw SchemaError(std::string(what) + ": needs at least one point");
  if (p.cols() != v.size()) throw SchemaError(std::string(what) + ": points/values size mismatch");
  if (!p.allFinite() || !v.allFinite()) throw SchemaError(std::string(what) + ": non-finite data");
  for (Index i = 0; i < p.cols(); ++i) {
    for (Index j = i + 1; j < p.cols(); ++j) {
      if ((p.col(i) - p.col(j)).lpNorm<Eigen::Infinity>() <= kMergeTol) {
        throw SchemaError(std::string(what) + ": points must be pairwise distinct");
      }
    }
  }
}

// Softmax weights of the LSE pieces at y.
VectorXd lse_weights(const SmoothQuadLSE& f, const Point& y) {
  VectorXd a = (f.slopes.transpose() * y + f.intercepts) / f.beta;
  a.array() -= a.maxCoeff();
  VectorXd w = a.array().exp();
  return w / w.sum();
}

double lse_value(const SmoothQuadLSE& f, const Point& y) { return smooth_value<double>(f, y); }

Point lse_gradient(const SmoothQuadLSE& f, const Point& y) {
  return f.epsilon * y + f.slopes * lse_weights(f, y);
}

MatrixXd lse_hessian(const SmoothQuadLSE& f, const Point& y) {
  const VectorXd w = lse_weights(f, y);
  const Point mean = f.slopes * w;
  MatrixXd cov = f.slopes * w.asDiagonal() * f.slopes.transpose() - mean * mean.transpose();
  return f.epsilon * MatrixXd::Identity(y.size(), y.size()) + cov / f.beta;
}

double max_affine_value(const MaxAffine& f, const Point& y) {
  return (f.slopes.transpose() * y + f.intercepts).maxCoeff();
}

Point max_affine_subgradient(const MaxAffine& f, const Point& y) {
  const VectorXd v = f.slopes.transpose() * y + f.intercepts;
  const double top = v.maxCoeff();
  const double tol = kTieTol * std::max(1.0, std::abs(top));
  Point g = Point::Zero(y.size());
  int active = 0;
  for (Index k = 0; k < v.size(); ++k) {
    if (v(k) >= top - tol) {
      g += f.slopes.col(k);
      ++active;
    }
  }
  return g / active;
}

double hull_value_1d(const PolyhedralHull& h, double x) {
  const Index n = h.points.cols();
  const double lo = h.points(0, 0);
  const double hi = h.points(0, n - 1);
  const double tol = kTieTol * std::max({1.0, std::abs(lo), std::abs(hi)});
  if (x < lo - tol || x > hi + tol) return kInf;
  if (n == 1) return h.values(0);
  x = std::clamp(x, lo, hi);
  const auto row = h.points.row(0);
  auto it = std::upper_bound(row.begin(), row.end(), x);
  Index j = std::clamp<Index>(std::distance(row.begin(), it), 1, n - 1);
  const double x0 = h.points(0, j - 1), x1 = h.points(0, j);
  const double t = (x - x0) / (x1 - x0);
  return (1.0 - t) * h.values(j - 1) + t * h.values(j);
}

double hull_subgradient_1d(const PolyhedralHull& h, double x) {
  const Index n = h.points.cols();
  const double lo = h.points(0, 0);
  const double hi = h.points(0, n - 1);
  if (n < 2 || !(x > lo) || !(x < hi)) {
    throw DomainError("grad_select: point outside the interior of the domain");
  }
  auto slope = [&](Index j) {
    return (h.values(j + 1) - h.values(j)) / (h.points(0, j + 1) - h.points(0, j));
  };
  for (Index j = 1; j < n - 1; ++j) {
    const double v = h.points(0, j);
    if (std::abs(x - v) <= kTieTol * std::max(1.0, std::abs(v))) return 0.5 * (slope(j - 1) + slope(j));
  }
  const auto row = h.points.row(0);
  auto it = std::upper_bound(row.begin(), row.end(), x);
  const Index j = std::clamp<Index>(std::distance(row.begin(), it), 1, n - 1);
  return slope(j - 1);
}

// Limits of the gradient range of a smooth representation in d = 1.
std::pair<double, double> slope_range_1d(const ConvexFunction& f) {
  if (auto s = f.as<SmoothQuadLSE>()) {
    if (s->epsilon > 0.0) return {-kInf, kInf};
    return {s->slopes.minCoeff(), s->slopes.maxCoeff()};
  }
  if (auto s = f.as<StarSum>()) return slope_range_1d(*s->base);
  return {-kInf, kInf};
}

// lim_{y -> +-inf} (x y - f(y)) at x equal to an extreme slope, epsilon = 0.
double boundary_conjugate_1d(const ConvexFunction& f, double x) {
  if (auto s = f.as<SmoothQuadLSE>()) {
    double acc = 0.0;
    double shift = -kInf;
    for (Index k = 0; k < s->slopes.cols(); ++k) {
      if (s->slopes(0, k) == x) shift = std::max(shift, s->intercepts(k) / s->beta);
    }
    for (Index k = 0; k < s->slopes.cols(); ++k) {
      if (s->slopes(0, k) == x) acc += std::exp(s->intercepts(k) / s->beta - shift);
    }
    return -s->beta * (shift + std::log(acc));
  }
  const auto& st = std::get<StarSum>(f.rep());
  return boundary_conjugate_1d(*st.base, x) - x * barycenter(st.shifts)(0);
}

struct InnerSolution {
  double value;
  Point argmax;
};

// sup_y <x, y> - f(y) for smooth f.
InnerSolution smooth_conjugate(const ConvexFunction& f, const Point& x) {
  const Index d = f.dim();
  if (d == 1) {
    const auto [smin, smax] = slope_range_1d(f);
    const double xv = x(0);
    const double tol = kTieTol * std::max(1.0, std::abs(xv));
    if (xv < smin - tol || xv > smax + tol) return {kInf, Point()};
    if (xv <= smin + tol || xv >= smax - tol) {
      return {boundary_conjugate_1d(f, xv <= smin + tol ? smin : smax), Point()};
    }
    auto deriv = [&](double y) { return grad_select(f, Point::Constant(1, y))(0) - xv; };
    // Geometric bracket growth, then Newton safeguarded by bisection.
    double lo = -1.0, hi = 1.0;
    for (int i = 0; deriv(lo) > 0.0; ++i) {
      if (i > 200) throw DomainError("conjugate: cannot bracket the maximizer");
      hi = lo;
      lo *= 2.0;
    }
    for (int i = 0; deriv(hi) < 0.0; ++i) {
      if (i > 200) throw DomainError("conjugate: cannot bracket the maximizer");
      lo = hi;
      hi *= 2.0;
    }
    double y = 0.5 * (lo + hi);
    double r = deriv(y);
    // A bracket collapsed to a few ulps locates the maximizer to full
    // precision even when a very steep gradient keeps r above tolerance.
    bool collapsed = false;
    for (int it = 0; it < kInnerMaxIter && std::abs(r) > kInnerTol * 1e-3; ++it) {
      if (r > 0.0) {
        hi = y;
      } else {
        lo = y;
      }
      const double h = hessian(f, Point::Constant(1, y))(0, 0);
      double next = h > 0.0 ? y - r / h : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (next == y || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(y))) {
        collapsed = true;
        break;
      }
      y = next;
      r = deriv(y);
    }
    if (!collapsed && std::abs(r) > kInnerTol) {
      throw DomainError("conjugate: inner maximization did not converge, residual " + fmt_residual(r));
    }
    const Point yp = Point::Constant(1, y);
    return {xv * y - evaluate(f, yp), yp};
  }

  // Damped Newton on h(y) = f(y) - <x, y>.
  Point y = Point::Zero(d);
  auto h = [&](const Point& p) { return evaluate(f, p) - x.dot(p); };
  double hy = h(y);
  Point g = grad_select(f, y) - x;
  for (int it = 0; it < kInnerMaxIter && g.norm() > kInnerTol; ++it) {
    const MatrixXd H = hessian(f, y);
    Point step = H.ldlt().solve(-g);
    if (!step.allFinite() || step.dot(g) >= 0.0) step = -g;
    // Full steps that halve the gradient without raising h beyond rounding
    // are taken: close to the optimum the Armijo decrease is below rounding.
    Point trial = y + step;
    Point gt = grad_select(f, trial) - x;
    double ht = h(trial);
    if (gt.norm() <= 0.5 * g.norm() && ht <= hy + 1e-12 * (1.0 + std::abs(hy))) {
      y = trial;
      hy = ht;
      g = gt;
      continue;
    }
    double t = 1.0;
    while (ht > hy + 1e-4 * t * g.dot(step) && t > 1e-12) {
      t *= 0.5;
      trial = y + t * step;
      ht = h(trial);
    }
    if (t <= 1e-12) break;
    y = trial;
    hy = ht;
    g = grad_select(f, y) - x;
  }
  if (g.norm() > kInnerTol) {
    throw DomainError("conjugate: inner maximization did not converge, residual " +
                      fmt_residual(g.norm()));
  }
  return {-hy, y};
}

// Conjugate of a StarSum over a MaxAffine base at x, exactly by LP.
InnerSolution star_max_affine_conjugate(const StarSum& s, const MaxAffine& f, const Point& x) {
  const Index K = s.shifts.size();
  const Index L = f.slopes.cols();
  MatrixXd cost(K, L);
  for (Index k = 0; k < K; ++k) {
    for (Index l = 0; l < L; ++l) {
      cost(k, l) = -(f.slopes.col(l).dot(s.shifts.atom(k)) + f.intercepts(l));
    }
  }
  const auto res = detail::barycentric_lp(cost, s.shifts.weights(), f.slopes, x);
  if (!res.feasible) return {kInf, Point()};
  return {res.value, res.multiplier};
}

InnerSolution conjugate_query(const NumericConjugate& c, const Point& x) {
  const ConvexFunction& base = *c.base;
  if (base.is_smooth()) return smooth_conjugate(base, x);
  if (auto s = base.as<StarSum>()) {
    if (auto f = s->base->as<MaxAffine>()) return star_max_affine_conjugate(*s, *f, x);
  }
  throw DomainError("conjugate: no numerical conjugate for representation " + base.type_name());
}

MaxAffine star_max_affine_1d(const MaxAffine& f, const DiscreteMeasure& q) {
  const AffineEnvelope1d env = upper_envelope_1d(f);
  const Index K = q.size();
  const size_t L = env.slopes.size();
  struct Event {
    double at;
    Index k;
    size_t l;
  };
  std::vector<Event> events;
  events.reserve(static_cast<size_t>(K) * (L - 1));
  for (Index k = 0; k < K; ++k) {
    for (size_t l = 0; l + 1 < L; ++l) events.push_back({env.breaks[l] - q.atoms()(0, k), k, l});
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.at < b.at; });

  double slope = env.slopes[0];
  double intercept = 0.0;
  for (Index k = 0; k < K; ++k) {
    intercept += q.weight(k) * (env.slopes[0] * q.atoms()(0, k) + env.intercepts[0]);
  }
  std::vector<double> slopes{slope}, intercepts{intercept};
  for (size_t e = 0; e < events.size();) {
    const double at = events[e].at;
    for (; e < events.size() && events[e].at == at; ++e) {
      const Event& ev = events[e];
      const double u = q.weight(ev.k);
      const double z = q.atoms()(0, ev.k);
      const double ds = env.slopes[ev.l + 1] - env.slopes[ev.l];
      slope += u * ds;
      intercept += u * (ds * z + env.intercepts[ev.l + 1] - env.intercepts[ev.l]);
    }
    slopes.push_back(slope);
    intercepts.push_back(intercept);
  }
  MaxAffine out;
  out.slopes = Eigen::Map<Eigen::RowVectorXd>(slopes.data(), static_cast<Index>(slopes.size()));
  out.intercepts = Eigen::Map<VectorXd>(intercepts.data(), static_cast<Index>(intercepts.size()));
  return out;
}

}  // namespace

ConvexFunction::ConvexFunction(MaxAffine f) : dim_(f.slopes.rows()) {
  check_pieces(f.slopes, f.intercepts, "max_affine");
  rep_ = std::move(f);
}

ConvexFunction::ConvexFunction(ValuesAtPoints f) : dim_(f.points.rows()) {
  check_points(f.points, f.values, "values");
  rep_ = std::move(f);
}

ConvexFunction::ConvexFunction(SmoothQuadLSE f) : dim_(f.slopes.rows()) {
  check_pieces(f.slopes, f.intercepts, "smooth_quad_lse");
  if (!(f.epsilon >= 0.0)) throw SchemaError("smooth_quad_lse: epsilon must be >= 0");
  if (!(f.beta > 0.0)) throw SchemaError("smooth_quad_lse: beta must be > 0");
  rep_ = std::move(f);
}

ConvexFunction::ConvexFunction(PolyhedralHull f) : dim_(f.points.rows()) {
  check_points(f.points, f.values, "polyhedral_hull");
  rep_ = std::move(f);
}

ConvexFunction::ConvexFunction(StarSum f) {
  if (!f.base) throw SchemaError("star: missing base function");
  dim_ = f.base->dim();
  require_dimension(dim_, f.shifts.dim(), "star");
  rep_ = std::move(f);
}

ConvexFunction::ConvexFunction(NumericConjugate f) {
  if (!f.base) throw SchemaError("conjugate: missing base function");
  dim_ = f.base->dim();
  rep_ = std::move(f);
}

std::string ConvexFunction::type_name() const {
  return std::visit(overloaded{[](const MaxAffine&) { return "max_affine"; },
                               [](const ValuesAtPoints&) { return "values"; },
                               [](const SmoothQuadLSE&) { return "smooth_quad_lse"; },
                               [](const PolyhedralHull&) { return "polyhedral_hull"; },
                               [](const StarSum&) { return "star"; },
                               [](const NumericConjugate&) { return "conjugate"; }},
                    rep_);
}

bool ConvexFunction::is_smooth() const {
  if (as<SmoothQuadLSE>()) return true;
  if (auto s = as<StarSum>()) return s->base->is_smooth();
  return false;
}

AffineEnvelope1d upper_envelope_1d(const MaxAffine& f) {
  if (f.slopes.rows() != 1) throw DomainError("upper_envelope_1d: dimension must be 1");
  // Active lines are the lower-hull vertices of the points (s_k, -b_k).
  const VectorXd s = f.slopes.row(0).transpose();
  const std::vector<Index> active = lower_hull_indices_1d(s, -f.intercepts);
  AffineEnvelope1d env;
  for (Index k : active) {
    env.slopes.push_back(s(k));
    env.intercepts.push_back(f.intercepts(k));
    env.source.push_back(k);
  }
  for (size_t l = 0; l + 1 < active.size(); ++l) {
    env.breaks.push_back((env.intercepts[l] - env.intercepts[l + 1]) /
                         (env.slopes[l + 1] - env.slopes[l]));
  }
  return env;
}

std::vector<Index> lower_hull_indices_1d(const VectorXd& x, const VectorXd& v) {
  std::vector<Index> order(static_cast<size_t>(x.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return x(a) < x(b) || (x(a) == x(b) && v(a) < v(b));
  });
  std::vector<Index> hull;
  auto cross = [&](Index o, Index a, Index b) {
    return (x(a) - x(o)) * (v(b) - v(o)) - (v(a) - v(o)) * (x(b) - x(o));
  };
  for (Index i : order) {
    if (!hull.empty() && x(hull.back()) == x(i)) continue;  // keeps the lower value
    while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), i) <= 0.0) hull.pop_back();
    hull.push_back(i);
  }
  return hull;
}

PolyhedralHull lower_hull_1d(const VectorXd& x, const VectorXd& v) {
  const std::vector<Index> hull = lower_hull_indices_1d(x, v);
  PolyhedralHull out;
  out.points.resize(1, static_cast<Index>(hull.size()));
  out.values.resize(static_cast<Index>(hull.size()));
  for (size_t j = 0; j < hull.size(); ++j) {
    out.points(0, static_cast<Index>(j)) = x(hull[j]);
    out.values(static_cast<Index>(j)) = v(hull[j]);
  }
  return out;
}

double evaluate(const ConvexFunction& f, const Point& y) {
  require_dimension(f.dim(), y.size(), "evaluate");
  return std::visit(
      overloaded{
          [&](const MaxAffine& g) { return max_affine_value(g, y); },
          [&](const ValuesAtPoints& g) {
            for (Index j = 0; j < g.points.cols(); ++j) {
              if ((g.points.col(j) - y).lpNorm<Eigen::Infinity>() <= kMergeTol) return g.values(j);
            }
            return kInf;
          },
          [&](const SmoothQuadLSE& g) { return lse_value(g, y); },
          [&](const PolyhedralHull& g) {
            if (g.points.rows() == 1) return hull_value_1d(g, y(0));
            const auto res = detail::barycentric_lp(g.values.transpose(), VectorXd::Ones(1), g.points, y);
            return res.feasible ? res.value : kInf;
          },
          [&](const StarSum& g) {
            double acc = 0.0;
            for (Index k = 0; k < g.shifts.size(); ++k) {
              acc += g.shifts.weight(k) * evaluate(*g.base, y + g.shifts.atom(k));
            }
            return acc;
          },
          [&](const NumericConjugate& g) { return conjugate_query(g, y).value; }},
      f.rep());
}

ConvexFunction conjugate(const ConvexFunction& f) {
  return std::visit(
      overloaded{
          [&](const MaxAffine& g) -> ConvexFunction {
            if (g.slopes.rows() == 1) return lower_hull_1d(g.slopes.row(0).transpose(), -g.intercepts);
            // Duplicate slopes keep the largest intercept.
            std::vector<Index> keep;
            for (Index k = 0; k < g.slopes.cols(); ++k) {
              bool dominated = false;
              for (Index l = 0; l < g.slopes.cols() && !dominated; ++l) {
                if (l == k) continue;
                const bool same = (g.slopes.col(k) - g.slopes.col(l)).lpNorm<Eigen::Infinity>() <= kMergeTol;
                dominated = same && (g.intercepts(l) > g.intercepts(k) ||
                                     (g.intercepts(l) == g.intercepts(k) && l < k));
              }
              if (!dominated) keep.push_back(k);
            }
            PolyhedralHull h;
            h.points.resize(g.slopes.rows(), static_cast<Index>(keep.size()));
            h.values.resize(static_cast<Index>(keep.size()));
            for (size_t i = 0; i < keep.size(); ++i) {
              h.points.col(static_cast<Index>(i)) = g.slopes.col(keep[i]);
              h.values(static_cast<Index>(i)) = -g.intercepts(keep[i]);
            }
            return h;
          },
          [&](const ValuesAtPoints& g) -> ConvexFunction { return MaxAffine{g.points, -g.values}; },
          [&](const PolyhedralHull& g) -> ConvexFunction { return MaxAffine{g.points, -g.values}; },
          [&](const SmoothQuadLSE&) -> ConvexFunction {
            return NumericConjugate{std::make_shared<const ConvexFunction>(f)};
          },
          [&](const StarSum&) -> ConvexFunction {
            return NumericConjugate{std::make_shared<const ConvexFunction>(f)};
          },
          [&](const NumericConjugate& g) -> ConvexFunction { return *g.base; }},
      f.rep());
}

ConvexFunction star(const ConvexFunction& f, const DiscreteMeasure& q) {
  require_dimension(f.dim(), q.dim(), "star");
  if (f.as<ValuesAtPoints>()) {
    throw DomainError("star: values-at-points domain is too thin to shift-integrate");
  }
  if (q.size() == 1 && q.atom(0).isZero(0.0)) return f;
  if (auto g = f.as<MaxAffine>(); g && f.dim() == 1) return star_max_affine_1d(*g, q);
  if (auto g = f.as<StarSum>()) return StarSum{g->base, convolve(g->shifts, q)};
  return StarSum{std::make_shared<const ConvexFunction>(f), q};
}

ConvexFunction convex_hull(const ValuesAtPoints& g) {
  check_points(g.points, g.values, "convex_hull");
  if (g.points.rows() == 1) return lower_hull_1d(g.points.row(0).transpose(), g.values);
  return PolyhedralHull{g.points, g.values};
}

Point grad_select(const ConvexFunction& f, const Point& y) {
  require_dimension(f.dim(), y.size(), "grad_select");
  return std::visit(
      overloaded{
          [&](const MaxAffine& g) { return max_affine_subgradient(g, y); },
          [&](const ValuesAtPoints&) -> Point {
            throw DomainError("grad_select: values-at-points has an empty domain interior");
          },
          [&](const SmoothQuadLSE& g) { return lse_gradient(g, y); },
          [&](const PolyhedralHull& g) -> Point {
            if (g.points.rows() == 1) return Point::Constant(1, hull_subgradient_1d(g, y(0)));
            const auto res = detail::barycentric_lp(g.values.transpose(), VectorXd::Ones(1), g.points, y);
            if (!res.feasible) throw DomainError("grad_select: point outside the domain");
            return res.multiplier;
          },
          [&](const StarSum& g) {
            Point acc = Point::Zero(y.size());
            for (Index k = 0; k < g.shifts.size(); ++k) {
              acc += g.shifts.weight(k) * grad_select(*g.base, y + g.shifts.atom(k));
            }
            return acc;
          },
          [&](const NumericConjugate& g) {
            InnerSolution s = conjugate_query(g, y);
            if (!std::isfinite(s.value) || s.argmax.size() == 0) {
              throw DomainError("grad_select: point outside the interior of the domain");
            }
            return s.argmax;
          }},
      f.rep());
}

MatrixXd hessian(const ConvexFunction& f, const Point& y) {
  if (auto g = f.as<SmoothQuadLSE>()) return lse_hessian(*g, y);
  if (auto g = f.as<StarSum>(); g && g->base->is_smooth()) {
    MatrixXd acc = MatrixXd::Zero(y.size(), y.size());
    for (Index k = 0; k < g->shifts.size(); ++k) {
      acc += g->shifts.weight(k) * hessian(*g->base, y + g->shifts.atom(k));
    }
    return acc;
  }
  throw DomainError("hessian: representation " + f.type_name() + " is not smooth");
}

ConvexFunction abs_function() {
  MaxAffine f;
  f.slopes = Eigen::RowVector2d(-1.0, 1.0);
  f.intercepts = Eigen::Vector2d::Zero();
  return f;
}

ConvexFunction half_square(Index d) {
  SmoothQuadLSE f;
  f.epsilon = 1.0;
  f.beta = 1.0;
  f.slopes = PointSet::Zero(d, 1);
  f.intercepts = VectorXd::Zero(1);
  return f;
}

}  // namespace qbass
