#include <doctest.h>

#include "mtwae/assignment.hpp"
#include "oracles.hpp"

using namespace mtwae;

TEST_CASE("hungarian matches exhaustive search") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 7;
    Eigen::MatrixXd c(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = trial % 3 == 0 ? double(rng.below(4)) : rng.uniform();
    const auto r = solve_hungarian(c);
    CHECK(r.cost == doctest::Approx(oracle::brute_force_assignment(c)).epsilon(1e-13));
    std::vector<int> seen(n, 0);
    for (int j : r.row_to_col) ++seen[j];
    for (int s : seen) CHECK(s == 1);
  }
}

TEST_CASE("auction reaches the optimum within its gap") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 5 + trial * 4;
    Eigen::MatrixXd c(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = rng.uniform() * rng.uniform();
    const auto exact = solve_hungarian(c);
    const auto a = solve_auction(c);
    CHECK(a.lower_bound <= exact.cost + 1e-12);
    CHECK(a.cost >= exact.cost - 1e-12);
    CHECK(a.cost - exact.cost <= 1e-6 * exact.cost + 1e-15);
  }
}

TEST_CASE("empty and singleton problems") {
  CHECK(solve_hungarian(Eigen::MatrixXd(0, 0)).row_to_col.empty());
  Eigen::MatrixXd one(1, 1);
  one << 3.5;
  CHECK(solve_hungarian(one).cost == 3.5);
  CHECK(solve_auction(one).cost == 3.5);
}
