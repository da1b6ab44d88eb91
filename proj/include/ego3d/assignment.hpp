#pragma once

#include <Eigen/Core>
#include <vector>

namespace ego3d {

/// Cost above which a pair is treated as forbidden by solve_assignment.
constexpr double kForbiddenCost = 1e9;

/// Minimum-cost bipartite assignment (Hungarian / shortest augmenting path).
/// Rectangular matrices are allowed; min(rows, cols) pairs are assigned.
/// Entries >= kForbiddenCost / 2 are dropped from the returned matching, so
/// callers encode gating by writing kForbiddenCost into the matrix.
/// Returns row -> col (-1 when unassigned).
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

}  // namespace ego3d
