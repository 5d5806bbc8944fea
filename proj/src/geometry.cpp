#include "mtwae/geometry.hpp"

#include <Eigen/QR>

#include "mtwae/error.hpp"
#include "mtwae/kernels.hpp"

namespace mtwae {

void validate(const BDTBasis& basis) {
  validate(basis.origin, false);
  if (basis.vectors.rows() != 2 * basis.origin.size())
    throw InvalidArgument("basis vectors need 2 rows per origin branch");
  if (!basis.vectors.allFinite()) throw InvalidArgument("basis vectors are not finite");
}

int basis_rank(const BDTBasis& basis, double tolerance) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(tolerance);
  cod.compute(basis.vectors);
  return static_cast<int>(cod.rank());
}

Eigen::VectorXd vectorize(const BDT& b) {
  Eigen::VectorXd v(2 * b.size());
  for (int i = 0; i < b.size(); ++i) {
    v[2 * i] = b.branches[i].birth;
    v[2 * i + 1] = b.branches[i].death;
  }
  return v;
}

BDT with_coordinates(const BDT& structure, const Eigen::VectorXd& coords) {
  if (coords.size() != 2 * structure.size())
    throw InvalidArgument("coordinate vector length does not match the tree");
  BDT out = structure;
  for (int i = 0; i < out.size(); ++i) {
    out.branches[i].birth = coords[2 * i];
    out.branches[i].death = coords[2 * i + 1];
  }
  return out;
}

BDT apply(const BDTBasis& basis, const Eigen::VectorXd& alpha) {
  if (alpha.size() != basis.dim()) throw InvalidArgument("coefficient count does not match basis");
  return with_coordinates(basis.origin, vectorize(basis.origin) + basis.vectors * alpha);
}

Eigen::VectorXd reorder(const BDT& b, const BDT& bhat, const Assignment& phi) {
  const std::vector<int> partner = phi.left_partners(bhat.size());
  Eigen::VectorXd v(2 * bhat.size());
  for (int i = 0; i < bhat.size(); ++i) {
    const Eigen::Vector2d p = partner[i] == kDiagonal ? diagonal_projection(point(bhat.branches[i]))
                                                      : point(b.branches[partner[i]]);
    v.segment<2>(2 * i) = p;
  }
  return v;
}

ProjectionSystem build_system(const BDT& b, const BDTBasis& basis, const std::vector<int>& partners) {
  const int n = basis.origin.size();
  if (static_cast<int>(partners.size()) != n) throw InvalidArgument("one partner per origin branch");
  ProjectionSystem s;
  s.partners = partners;
  s.m = basis.vectors;
  s.r.resize(2 * n);
  const Eigen::VectorXd o = vectorize(basis.origin);
  for (int j = 0; j < n; ++j) {
    const int p = partners[j];
    if (p != kDiagonal) {
      s.r.segment<2>(2 * j) = point(b.branches[p]) - o.segment<2>(2 * j);
      continue;
    }
    // (I - Delta) keeps the half-difference component orthogonal to the diagonal.
    const Eigen::RowVectorXd bx = basis.vectors.row(2 * j), by = basis.vectors.row(2 * j + 1);
    s.m.row(2 * j) = 0.5 * (bx - by);
    s.m.row(2 * j + 1) = 0.5 * (by - bx);
    const double ox = o[2 * j], oy = o[2 * j + 1];
    s.r[2 * j] = -0.5 * (ox - oy);
    s.r[2 * j + 1] = -0.5 * (oy - ox);
  }
  return s;
}

namespace {

std::vector<int> assign(const BDT& estimate, const BDT& b, double* cost2) {
  const Transport t = wasserstein_bdt(estimate, b);
  if (cost2) *cost2 = t.distance * t.distance;
  return t.phi.left_partners(estimate.size());
}

}  // namespace

Projection project(const BDT& b, const BDTBasis& basis, int n_it, bool final_error) {
  validate(basis);
  if (n_it < 1) throw InvalidArgument("n_it must be at least 1");
  Projection p;
  p.alpha = Eigen::VectorXd::Zero(basis.dim());
  double e = 0.0;
  std::vector<int> partners = assign(basis.origin, b, &e);
  p.errors.push_back(e);
  for (int it = 0; it < n_it; ++it) {
    if (it > 0) {
      partners = assign(apply(basis, p.alpha), b, &e);
      p.errors.push_back(e);
    }
    const ProjectionSystem s = build_system(b, basis, partners);
    p.alpha = PinvSolve<double>(s.m, s.r).alpha;
    p.partners = partners;
  }
  if (final_error) {
    assign(apply(basis, p.alpha), b, &e);
    p.errors.push_back(e);
    p.error = e;
  }
  if (!p.alpha.allFinite()) throw NumericError("projection produced non-finite coefficients");
  return p;
}

double projection_error(const BDT& b, const BDTBasis& basis, const Eigen::VectorXd& alpha) {
  const double d = wasserstein_bdt(b, apply(basis, alpha)).distance;
  return d * d;
}

}  // namespace mtwae
