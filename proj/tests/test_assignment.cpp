#include <doctest.h>

#include "ego3d/assignment.hpp"
#include "ego3d/rng.hpp"
#include "oracles.hpp"

using namespace ego3d;

namespace {

double assignment_cost(const Eigen::MatrixXd& cost, const std::vector<int>& match) {
  double total = 0.0;
  for (std::size_t i = 0; i < match.size(); ++i)
    if (match[i] >= 0) total += cost(static_cast<Eigen::Index>(i), match[i]);
  return total;
}

}  // namespace

TEST_CASE("hungarian matches brute force on small random matrices") {
  Rng rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.index(4));
    const int m = 1 + static_cast<int>(rng.index(4));
    Eigen::MatrixXd cost(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) cost(i, j) = rng.uniform(-5.0, 5.0);
    const std::vector<int> match = solve_assignment(cost);
    const double got = assignment_cost(cost, match);
    const double best = oracles::brute_force_assignment(cost, kForbiddenCost);
    CHECK(got == doctest::Approx(best).epsilon(1e-12));
    // one-to-one
    std::vector<bool> used(static_cast<std::size_t>(m), false);
    for (int i = 0; i < n; ++i)
      if (match[static_cast<std::size_t>(i)] >= 0) {
        CHECK(!used[static_cast<std::size_t>(match[static_cast<std::size_t>(i)])]);
        used[static_cast<std::size_t>(match[static_cast<std::size_t>(i)])] = true;
      }
  }
}

TEST_CASE("hungarian strips forbidden pairs") {
  Eigen::MatrixXd cost(2, 2);
  cost << 1.0, kForbiddenCost, kForbiddenCost, kForbiddenCost;
  const std::vector<int> match = solve_assignment(cost);
  CHECK(match[0] == 0);
  CHECK(match[1] == -1);
}

TEST_CASE("hungarian never beats itself with greedy") {
  Rng rng(321);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.index(6));
    const int m = 2 + static_cast<int>(rng.index(6));
    Eigen::MatrixXd cost(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) cost(i, j) = rng.uniform(0.0, 1.0);

    // Greedy oracle: repeatedly take the globally cheapest remaining pair.
    Eigen::MatrixXd g = cost;
    double greedy = 0.0;
    for (int k = 0; k < std::min(n, m); ++k) {
      Eigen::Index bi, bj;
      g.minCoeff(&bi, &bj);
      greedy += g(bi, bj);
      g.row(bi).setConstant(1e18);
      g.col(bj).setConstant(1e18);
    }
    const double optimal = assignment_cost(cost, solve_assignment(cost));
    CHECK(optimal <= greedy + 1e-12);
  }
}
