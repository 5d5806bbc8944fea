#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mtwae/topology.hpp"

namespace mtwae {

inline constexpr int kDiagonal = -1;

struct Match {
  int left = kDiagonal;
  int right = kDiagonal;
  bool operator==(const Match&) const = default;
};

/// Partial matching between two point sets; unmatched points go to the
/// diagonal. Diagonal-to-diagonal pairs are never stored.
struct Assignment {
  std::vector<Match> matches;

  /// partner[i] for every left index, kDiagonal when deleted.
  std::vector<int> left_partners(int n_left) const;
  std::vector<int> right_partners(int n_right) const;
};

struct Transport {
  double distance = 0.0;
  Assignment phi;
};

inline Eigen::Vector2d point(const Branch& b) { return {b.birth, b.death}; }
inline Eigen::Vector2d point(const DiagramPoint& p) { return {p.birth, p.death}; }

inline Eigen::Vector2d diagonal_projection(const Eigen::Vector2d& p) {
  const double m = 0.5 * (p.x() + p.y());
  return {m, m};
}

/// ||p - q||_order, or 0 when both points lie on the diagonal.
double ground_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& q, double order = 2.0);

/// Squared Euclidean ground cost with the diagonal rule.
inline double ground_cost2(const Eigen::Vector2d& p, const Eigen::Vector2d& q) {
  if (p.x() == p.y() && q.x() == q.y()) return 0.0;
  return (p - q).squaredNorm();
}

/// Squared distance of p to its diagonal projection.
inline double diagonal_cost2(const Eigen::Vector2d& p) {
  const double d = p.y() - p.x();
  return 0.5 * d * d;
}

std::pair<PersistenceDiagram, PersistenceDiagram> augment(const PersistenceDiagram& di,
                                                         const PersistenceDiagram& dj);

/// Diagrams up to this many augmented points use the exact Hungarian solver.
inline constexpr int kExactSolverLimit = 64;

Transport wasserstein_diagrams(const PersistenceDiagram& di, const PersistenceDiagram& dj,
                               double order = 2.0);

/// Tree-constrained W2 between BDTs: roots match roots, a branch matched to
/// a branch has its children matched among their children, and a deleted
/// branch takes its whole subtree to the diagonal.
Transport wasserstein_bdt(const BDT& bi, const BDT& bj);

/// Re-sums sum of squared ground costs realized by phi.
double assignment_cost2(const BDT& bi, const BDT& bj, const Assignment& phi);
double assignment_cost(const PersistenceDiagram& di, const PersistenceDiagram& dj,
                       const Assignment& phi, double order = 2.0);

Eigen::MatrixXd distance_matrix(std::span<const BDT> ensemble);

void write_distance_csv(const std::string& path, const Eigen::MatrixXd& d,
                        const std::vector<std::string>& names);
Eigen::MatrixXd read_distance_csv(const std::string& path, std::vector<std::string>* names = nullptr);

}  // namespace mtwae
