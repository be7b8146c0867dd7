#include "qbass/network_simplex.hpp"

#include "qbass/common.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace qbass {

namespace {

struct Cell {
  Eigen::Index row;
  Eigen::Index col;
  double flow;
};

// Bipartite spanning tree: nodes [0, m) are rows, [m, m + n) are columns.
struct Tree {
  std::vector<Eigen::Index> parent;       // node
  std::vector<Eigen::Index> parent_cell;  // index into cells
  std::vector<int> depth;
};

}  // namespace

TransportSolution solve_transport(const Eigen::MatrixXd& cost, const Eigen::VectorXd& supply,
                                  const Eigen::VectorXd& demand, double pivot_tol) {
  using Eigen::Index;
  const Index m = cost.rows();
  const Index n = cost.cols();
  if (supply.size() != m || demand.size() != n || m == 0 || n == 0) {
    throw DomainError("transport: cost matrix does not match marginal sizes");
  }
  const double total = supply.sum();
  if (std::abs(total - demand.sum()) > 1e-9 * std::max(1.0, total)) {
    throw DomainError("transport: unbalanced marginals");
  }

  // Northwest corner start: m + n - 1 cells forming a spanning tree.
  std::vector<Cell> cells;
  cells.reserve(static_cast<size_t>(m + n - 1));
  {
    Eigen::VectorXd ra = supply;
    Eigen::VectorXd rb = demand * (total / demand.sum());
    Index i = 0, j = 0;
    while (true) {
      const double f = std::max(0.0, std::min(ra(i), rb(j)));
      cells.push_back({i, j, f});
      ra(i) -= f;
      rb(j) -= f;
      if (i == m - 1 && j == n - 1) break;
      if (i == m - 1) {
        ++j;
      } else if (j == n - 1) {
        ++i;
      } else if (ra(i) <= rb(j)) {
        ++i;
      } else {
        ++j;
      }
    }
    // Rounding residue lands on the final cell.
    cells.back().flow = std::max(0.0, cells.back().flow + std::min(ra(m - 1), rb(n - 1)));
  }

  const double cost_scale = std::max(1.0, cost.cwiseAbs().maxCoeff());
  const double price_tol = pivot_tol * cost_scale;
  Eigen::VectorXd u(m), v(n);
  Eigen::MatrixXi basic_index = Eigen::MatrixXi::Constant(m, n, -1);
  for (size_t k = 0; k < cells.size(); ++k) {
    basic_index(cells[k].row, cells[k].col) = static_cast<int>(k);
  }

  const Index nodes = m + n;
  std::vector<std::vector<std::pair<Index, Index>>> adjacency(nodes);
  Tree tree;
  auto rebuild = [&]() {
    for (auto& a : adjacency) a.clear();
    for (size_t k = 0; k < cells.size(); ++k) {
      adjacency[cells[k].row].push_back({m + cells[k].col, static_cast<Index>(k)});
      adjacency[m + cells[k].col].push_back({cells[k].row, static_cast<Index>(k)});
    }
    tree.parent.assign(nodes, -1);
    tree.parent_cell.assign(nodes, -1);
    tree.depth.assign(nodes, -1);
    std::vector<Index> stack{0};
    tree.depth[0] = 0;
    u(0) = 0.0;
    while (!stack.empty()) {
      const Index a = stack.back();
      stack.pop_back();
      for (auto [b, k] : adjacency[a]) {
        if (tree.depth[b] >= 0) continue;
        tree.depth[b] = tree.depth[a] + 1;
        tree.parent[b] = a;
        tree.parent_cell[b] = k;
        const Cell& c = cells[k];
        if (b >= m) {
          v(b - m) = cost(c.row, c.col) - u(c.row);
        } else {
          u(b) = cost(c.row, c.col) - v(c.col);
        }
        stack.push_back(b);
      }
    }
  };

  TransportSolution sol;
  int degenerate_run = 0;
  while (true) {
    rebuild();
    const bool bland = degenerate_run > 2 * (m + n);
    Index ep = -1, eq = -1;
    double best = -price_tol;
    for (Index i = 0; i < m && !(bland && ep >= 0); ++i) {
      for (Index j = 0; j < n; ++j) {
        if (basic_index(i, j) >= 0) continue;
        const double r = cost(i, j) - u(i) - v(j);
        if (r < best) {
          ep = i;
          eq = j;
          if (bland) break;
          best = r;
        }
      }
    }
    if (ep < 0) break;

    // Cycle: entering cell, then the tree path from column eq back to row ep.
    std::vector<Index> up_from_col, up_from_row;
    Index a = m + eq, b = ep;
    while (a != b) {
      if (tree.depth[a] >= tree.depth[b]) {
        up_from_col.push_back(tree.parent_cell[a]);
        a = tree.parent[a];
      } else {
        up_from_row.push_back(tree.parent_cell[b]);
        b = tree.parent[b];
      }
    }
    std::vector<Index> path = up_from_col;
    path.insert(path.end(), up_from_row.rbegin(), up_from_row.rend());

    double theta = std::numeric_limits<double>::infinity();
    Index leaving = -1;
    for (size_t t = 0; t < path.size(); t += 2) {
      const Cell& c = cells[path[t]];
      const bool better = c.flow < theta - 1e-15;
      const bool tie = !better && c.flow <= theta + 1e-15 && leaving >= 0 &&
                       c.row * n + c.col < cells[leaving].row * n + cells[leaving].col;
      if (better || tie) {
        theta = std::min(theta, c.flow);
        leaving = path[t];
      }
    }
    theta = std::max(theta, 0.0);
    for (size_t t = 0; t < path.size(); ++t) {
      Cell& c = cells[path[t]];
      c.flow += (t % 2 == 0) ? -theta : theta;
      if (c.flow < 0.0) c.flow = 0.0;
    }
    basic_index(cells[leaving].row, cells[leaving].col) = -1;
    cells[leaving] = {ep, eq, theta};
    basic_index(ep, eq) = static_cast<int>(leaving);
    degenerate_run = theta <= 1e-15 ? degenerate_run + 1 : 0;
    ++sol.pivots;
  }

  sol.flow = Eigen::MatrixXd::Zero(m, n);
  for (const Cell& c : cells) sol.flow(c.row, c.col) = c.flow;
  sol.row_potential = u;
  sol.col_potential = v;
  sol.cost = (sol.flow.array() * cost.array()).sum();
  return sol;
}

}  // namespace qbass
