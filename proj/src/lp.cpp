#include "qbass/lp.hpp"

#include <algorithm>
#include <cmath>

namespace qbass::lp {

const char* to_string(Status status) {
  switch (status) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::IterationLimit: return "iteration limit";
  }
  return "unknown";
}

Problem ProblemBuilder::build() const {
  Problem p;
  const auto m = static_cast<Eigen::Index>(b_.size());
  p.A.resize(m, c_.size());
  p.A.setFromTriplets(triplets_.begin(), triplets_.end());
  p.A.makeCompressed();
  p.b = Eigen::Map<const Eigen::VectorXd>(b_.data(), m);
  p.c = c_;
  return p;
}

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

class RevisedSimplex {
 public:
  RevisedSimplex(const Problem& p, const Options& o)
      : A_(p.A), opt_(o), m_(p.A.rows()), n_(p.A.cols()) {
    sign_ = VectorXd::Ones(m_);
    rhs_ = p.b;
    for (Index r = 0; r < m_; ++r) {
      if (rhs_(r) < 0.0) {
        sign_(r) = -1.0;
        rhs_(r) = -rhs_(r);
      }
    }
    cost_ = p.c;
    basis_.resize(m_);
    position_.assign(n_ + m_, -1);
    for (Index r = 0; r < m_; ++r) {
      basis_[r] = n_ + r;
      position_[n_ + r] = r;
    }
    binv_ = MatrixXd::Identity(m_, m_);
    xb_ = rhs_;
    scale_ = std::max(1.0, rhs_.lpNorm<Eigen::Infinity>());
  }

  Result run() {
    Result res;
    if (m_ == 0) {
      res.x = VectorXd::Zero(n_);
      res.duals = VectorXd();
      if ((cost_.array() < 0.0).any()) {
        res.status = Status::Unbounded;
      } else {
        res.status = Status::Optimal;
      }
      return res;
    }

    phase_ = 1;
    Status st = iterate(res.iterations);
    if (st != Status::Optimal) {
      res.status = st;
      return res;
    }
    double infeas = 0.0;
    for (Index r = 0; r < m_; ++r) {
      if (basis_[r] >= n_) infeas += std::max(0.0, xb_(r));
    }
    if (infeas > opt_.feasibility_tol * scale_) {
      res.status = Status::Infeasible;
      res.objective = infeas;
      return res;
    }
    drive_out_artificials();

    phase_ = 2;
    st = iterate(res.iterations);
    res.status = st;
    if (st != Status::Optimal) return res;

    refactor();
    res.x = VectorXd::Zero(n_);
    for (Index r = 0; r < m_; ++r) {
      if (basis_[r] < n_) res.x(basis_[r]) = std::max(0.0, xb_(r));
    }
    res.objective = cost_.dot(res.x);
    VectorXd y = duals();
    res.duals = y.cwiseProduct(sign_);
    return res;
  }

 private:
  double column_cost(Index j) const {
    if (phase_ == 1) return j >= n_ ? 1.0 : 0.0;
    return j >= n_ ? 0.0 : cost_(j);
  }

  VectorXd duals() const {
    VectorXd cb(m_);
    for (Index r = 0; r < m_; ++r) cb(r) = column_cost(basis_[r]);
    return binv_.transpose() * cb;
  }

  // Sign-adjusted structural column j dotted with v.
  double dot_column(Index j, const VectorXd& v) const {
    if (j >= n_) return v(j - n_);
    double s = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(A_, j); it; ++it) {
      s += sign_(it.row()) * it.value() * v(it.row());
    }
    return s;
  }

  VectorXd ftran(Index j) const {
    if (j >= n_) return binv_.col(j - n_);
    VectorXd alpha = VectorXd::Zero(m_);
    for (Eigen::SparseMatrix<double>::InnerIterator it(A_, j); it; ++it) {
      alpha.noalias() += (sign_(it.row()) * it.value()) * binv_.col(it.row());
    }
    return alpha;
  }

  void refactor() {
    MatrixXd B = MatrixXd::Zero(m_, m_);
    for (Index r = 0; r < m_; ++r) {
      const Index j = basis_[r];
      if (j >= n_) {
        B(j - n_, r) = 1.0;
      } else {
        for (Eigen::SparseMatrix<double>::InnerIterator it(A_, j); it; ++it) {
          B(it.row(), r) = sign_(it.row()) * it.value();
        }
      }
    }
    binv_ = B.partialPivLu().inverse();
    xb_ = binv_ * rhs_;
  }

  void pivot(Index row, Index entering, const VectorXd& alpha, double theta) {
    xb_.noalias() -= theta * alpha;
    xb_(row) = theta;
    const double piv = alpha(row);
    binv_.row(row) /= piv;
    for (Index i = 0; i < m_; ++i) {
      if (i != row && alpha(i) != 0.0) binv_.row(i) -= alpha(i) * binv_.row(row);
    }
    position_[basis_[row]] = -1;
    basis_[row] = entering;
    position_[entering] = row;
    if (++since_refactor_ >= opt_.refactor_every) {
      refactor();
      since_refactor_ = 0;
    }
  }

  Status iterate(long& iterations) {
    int degenerate_run = 0;
    while (true) {
      if (iterations >= opt_.max_iterations) return Status::IterationLimit;
      const bool bland = degenerate_run >= opt_.bland_after;

      const VectorXd y = duals();
      Index entering = -1;
      double best = -opt_.optimality_tol;
      for (Index j = 0; j < n_ + m_; ++j) {
        if (position_[j] >= 0) continue;
        if (phase_ == 2 && j >= n_) continue;
        const double d = column_cost(j) - dot_column(j, y);
        if (d < best) {
          entering = j;
          if (bland) break;
          best = d;
        }
      }
      if (entering < 0) return Status::Optimal;

      const VectorXd alpha = ftran(entering);
      Index leave = -1;
      if (bland) {
        double min_ratio = kHuge;
        for (Index i = 0; i < m_; ++i) {
          double ratio;
          if (!ratio_for(i, alpha(i), ratio)) continue;
          if (ratio < min_ratio - 1e-15 ||
              (ratio <= min_ratio + 1e-15 && leave >= 0 && basis_[i] < basis_[leave])) {
            min_ratio = std::min(ratio, min_ratio);
            leave = i;
          }
        }
      } else {
        // Harris two-pass: relaxed bound, then the largest pivot inside it.
        double bound = kHuge;
        for (Index i = 0; i < m_; ++i) {
          if (alpha(i) > opt_.pivot_tol && !fixed_artificial(i)) {
            bound = std::min(bound, (std::max(xb_(i), 0.0) + opt_.feasibility_tol) / alpha(i));
          } else if (fixed_artificial(i) && std::abs(alpha(i)) > opt_.pivot_tol) {
            bound = 0.0;
          }
        }
        double largest = 0.0;
        for (Index i = 0; i < m_; ++i) {
          double ratio;
          if (!ratio_for(i, alpha(i), ratio)) continue;
          if (ratio <= bound && std::abs(alpha(i)) > largest) {
            largest = std::abs(alpha(i));
            leave = i;
          }
        }
      }
      if (leave < 0) return Status::Unbounded;

      double theta = fixed_artificial(leave) ? 0.0 : std::max(xb_(leave), 0.0) / alpha(leave);
      if (theta <= 1e-12) {
        ++degenerate_run;
      } else {
        degenerate_run = 0;
      }
      pivot(leave, entering, alpha, theta);
      ++iterations;
    }
  }

  bool fixed_artificial(Index i) const { return phase_ == 2 && basis_[i] >= n_; }

  bool ratio_for(Index i, double a, double& ratio) const {
    if (fixed_artificial(i)) {
      if (std::abs(a) <= opt_.pivot_tol) return false;
      ratio = 0.0;
      return true;
    }
    if (a <= opt_.pivot_tol) return false;
    ratio = std::max(xb_(i), 0.0) / a;
    return true;
  }

  void drive_out_artificials() {
    for (Index r = 0; r < m_; ++r) {
      if (basis_[r] < n_) continue;
      const VectorXd rho = binv_.row(r).transpose();
      Index candidate = -1;
      double largest = 1e-9;
      for (Index j = 0; j < n_; ++j) {
        if (position_[j] >= 0) continue;
        const double v = std::abs(dot_column(j, rho));
        if (v > largest) {
          largest = v;
          candidate = j;
        }
      }
      if (candidate < 0) continue;  // redundant row
      const VectorXd alpha = ftran(candidate);
      pivot(r, candidate, alpha, xb_(r) / alpha(r));
    }
    refactor();
    since_refactor_ = 0;
  }

  static constexpr double kHuge = 1e300;

  const Eigen::SparseMatrix<double>& A_;
  Options opt_;
  Index m_;
  Index n_;
  VectorXd sign_;
  VectorXd rhs_;
  VectorXd cost_;
  std::vector<Index> basis_;
  std::vector<Index> position_;
  MatrixXd binv_;
  VectorXd xb_;
  double scale_ = 1.0;
  int phase_ = 1;
  int since_refactor_ = 0;
};

}  // namespace

Result solve(const Problem& problem, const Options& options) {
  RevisedSimplex simplex(problem, options);
  return simplex.run();
}

}  // namespace qbass::lp
