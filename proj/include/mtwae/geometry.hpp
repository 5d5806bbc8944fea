#pragma once

#include <vector>

#include <Eigen/Core>

#include "mtwae/metric.hpp"
#include "mtwae/topology.hpp"

namespace mtwae {

/// Origin tree plus d column vectors of 2|O| branch displacements.
struct BDTBasis {
  BDT origin;
  Eigen::MatrixXd vectors;

  int dim() const { return static_cast<int>(vectors.cols()); }
};

/// Shape check: one row per origin coordinate. Rank is not enforced since a
/// basis may have more columns than coordinates (see basis_rank).
void validate(const BDTBasis& basis);
int basis_rank(const BDTBasis& basis, double tolerance = 1e-10);

Eigen::VectorXd vectorize(const BDT& b);
/// Copy of `structure` with coordinates taken from `coords`.
BDT with_coordinates(const BDT& structure, const Eigen::VectorXd& coords);

/// Origin displaced by vectors * alpha; no validity projection.
BDT apply(const BDTBasis& basis, const Eigen::VectorXd& alpha);

/// For each bhat branch, the coordinates of its partner in b (case 1) or
/// the diagonal projection of the bhat branch itself (case 4).
Eigen::VectorXd reorder(const BDT& b, const BDT& bhat, const Assignment& phi);

/// Fixed-assignment least-squares system M alpha ~ r. Branches of the
/// origin matched to b contribute their residual directly; branches sent to
/// the diagonal contribute only their off-diagonal component (I - Delta).
struct ProjectionSystem {
  Eigen::MatrixXd m;
  Eigen::VectorXd r;
  std::vector<int> partners;  // per origin branch, index in b or kDiagonal
};

ProjectionSystem build_system(const BDT& b, const BDTBasis& basis, const std::vector<int>& partners);

struct Projection {
  Eigen::VectorXd alpha;
  double error = 0.0;               // squared W^T_2 to the final estimate
  std::vector<int> partners;        // assignment used by the last update
  std::vector<double> errors;       // error before the first and after each update
};

/// Alternates optimal assignment and least-squares update, starting from
/// alpha = 0, for n_it rounds.
Projection project(const BDT& b, const BDTBasis& basis, int n_it, bool final_error = true);

double projection_error(const BDT& b, const BDTBasis& basis, const Eigen::VectorXd& alpha);

}  // namespace mtwae
