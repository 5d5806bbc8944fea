#pragma once

#include <vector>

#include <Eigen/Core>

namespace mtwae {

struct AssignmentResult {
  std::vector<int> row_to_col;
  double cost = 0.0;
};

/// Exact minimum-cost perfect matching on a square matrix, O(n^3)
/// shortest augmenting paths with potentials.
AssignmentResult solve_hungarian(const Eigen::MatrixXd& cost);

struct AuctionOptions {
  double relative_gap = 1e-6;
  double epsilon_factor = 5.0;
  int max_phases = 200;
};

/// Forward auction with epsilon scaling. Stops once the primal cost and the
/// dual bound agree to `relative_gap`; `gap` reports the final certificate.
struct AuctionResult : AssignmentResult {
  double lower_bound = 0.0;
};
AuctionResult solve_auction(const Eigen::MatrixXd& cost, const AuctionOptions& opt = {});

}  // namespace mtwae
