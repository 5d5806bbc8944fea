#include "mtwae/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mtwae/error.hpp"

namespace mtwae {

AssignmentResult solve_hungarian(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw InvalidArgument("assignment matrix must be square");
  const int n = static_cast<int>(a.rows());
  AssignmentResult res;
  res.row_to_col.assign(n, -1);
  if (n == 0) return res;
  if (!a.allFinite()) throw NumericError("assignment cost is not finite");

  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays, column 0 is the virtual start.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  for (int j = 1; j <= n; ++j) res.row_to_col[p[j] - 1] = j - 1;
  for (int i = 0; i < n; ++i) res.cost += a(i, res.row_to_col[i]);
  return res;
}

AuctionResult solve_auction(const Eigen::MatrixXd& cost, const AuctionOptions& opt) {
  if (cost.rows() != cost.cols()) throw InvalidArgument("assignment matrix must be square");
  const int n = static_cast<int>(cost.rows());
  AuctionResult res;
  res.row_to_col.assign(n, -1);
  if (n == 0) return res;
  if (!cost.allFinite()) throw NumericError("assignment cost is not finite");
  if (n == 1) {
    res.row_to_col[0] = 0;
    res.cost = res.lower_bound = cost(0, 0);
    return res;
  }

  // Maximize benefit = -cost. Prices persist across scaling phases.
  const double cmax = cost.cwiseAbs().maxCoeff();
  std::vector<double> price(n, 0.0);
  std::vector<int> owner(n, -1), col_of(n, -1);
  double eps = std::max(cmax, 1e-300) / 4.0;
  for (int phase = 0; phase < opt.max_phases; ++phase) {
    std::fill(owner.begin(), owner.end(), -1);
    std::fill(col_of.begin(), col_of.end(), -1);
    std::vector<int> queue(n);
    for (int i = 0; i < n; ++i) queue[i] = n - 1 - i;
    while (!queue.empty()) {
      const int i = queue.back();
      queue.pop_back();
      double best = -std::numeric_limits<double>::infinity(), second = best;
      int bj = -1;
      for (int j = 0; j < n; ++j) {
        const double val = -cost(i, j) - price[j];
        if (val > best) {
          second = best;
          best = val;
          bj = j;
        } else if (val > second) {
          second = val;
        }
      }
      price[bj] += best - second + eps;
      if (owner[bj] >= 0) {
        col_of[owner[bj]] = -1;
        queue.push_back(owner[bj]);
      }
      owner[bj] = i;
      col_of[i] = bj;
    }
    double primal = 0.0;
    for (int i = 0; i < n; ++i) primal += cost(i, col_of[i]);
    // Dual of the benefit problem bounds the optimal cost from below.
    double dual = 0.0;
    for (int j = 0; j < n; ++j) dual += price[j];
    for (int i = 0; i < n; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < n; ++j) best = std::max(best, -cost(i, j) - price[j]);
      dual += best;
    }
    const double lower = -dual;
    res.row_to_col = col_of;
    res.cost = primal;
    res.lower_bound = lower;
    if (primal - lower <= opt.relative_gap * std::max(std::abs(primal), 1e-300) ||
        primal - lower <= 0.0)
      return res;
    eps = std::max(eps / opt.epsilon_factor, cmax * 1e-12);
  }
  throw NumericError("auction did not reach the requested gap");
}

}  // namespace mtwae
