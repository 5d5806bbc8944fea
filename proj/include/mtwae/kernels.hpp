#pragma once

// Differentiable building blocks of a layer, with their adjoints.

#include <algorithm>

#include <Eigen/Core>
#include <Eigen/QR>

namespace mtwae {

template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <class Derived>
auto leaky_relu(const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar slope) {
  using S = typename Derived::Scalar;
  return x.unaryExpr([slope](S v) { return v >= S(0) ? v : slope * v; });
}

/// Adjoint of leaky_relu at pre-activation `x`.
template <class DerivedX, class DerivedG>
auto leaky_relu_backward(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedG>& g,
                         typename DerivedX::Scalar slope) {
  using S = typename DerivedX::Scalar;
  return x.binaryExpr(g, [slope](S v, S gv) { return v >= S(0) ? gv : slope * gv; });
}

/// Minimum-norm least squares solve through a complete orthogonal
/// decomposition; singular values below `threshold` (relative) count as zero.
template <class Scalar>
struct PinvSolve {
  MatrixX<Scalar> pinv;
  VectorX<Scalar> alpha;

  PinvSolve() = default;
  PinvSolve(const MatrixX<Scalar>& m, const VectorX<Scalar>& r, Scalar threshold = Scalar(1e-10)) {
    Eigen::CompleteOrthogonalDecomposition<MatrixX<Scalar>> cod;
    cod.setThreshold(threshold);
    cod.compute(m);
    pinv = cod.pseudoInverse();
    alpha = pinv * r;
  }
};

/// Adjoint of alpha = pinv(M) r for upstream gradient g. Valid where the
/// rank of M is locally constant.
template <class Scalar>
void pinv_backward(const MatrixX<Scalar>& m, const VectorX<Scalar>& r, const PinvSolve<Scalar>& s,
                   const VectorX<Scalar>& g, MatrixX<Scalar>& grad_m, VectorX<Scalar>& grad_r) {
  const MatrixX<Scalar>& a = s.pinv;
  const VectorX<Scalar> atg = a.transpose() * g;
  const VectorX<Scalar> e = r - m * s.alpha;
  const VectorX<Scalar> aatg = a * atg;
  const VectorX<Scalar> ata = a.transpose() * s.alpha;
  const VectorX<Scalar> null_g = g - a * (m * g);
  grad_r = atg;
  grad_m = -atg * s.alpha.transpose() + e * aatg.transpose() + ata * null_g.transpose();
}

/// Validity projection of one branch (x, y): clamp to [0,1], then snap an
/// inverted branch to its midpoint on the diagonal.
template <class Scalar>
struct GammaBranch {
  Scalar x, y;
  Scalar dx = 1, dy = 1;  // derivative of the clamps
  bool midpoint = false;

  GammaBranch(Scalar bx, Scalar by) {
    x = std::clamp(bx, Scalar(0), Scalar(1));
    y = std::clamp(by, Scalar(0), Scalar(1));
    dx = (bx > Scalar(0) && bx < Scalar(1)) ? Scalar(1) : Scalar(0);
    dy = (by > Scalar(0) && by < Scalar(1)) ? Scalar(1) : Scalar(0);
    if (x > y) {
      midpoint = true;
      x = y = Scalar(0.5) * (x + y);
    }
  }

  /// Gradient with respect to the raw (bx, by) given output gradients.
  std::pair<Scalar, Scalar> backward(Scalar gx, Scalar gy) const {
    if (midpoint) {
      const Scalar gm = Scalar(0.5) * (gx + gy);
      return {gm * dx, gm * dy};
    }
    return {gx * dx, gy * dy};
  }
};

}  // namespace mtwae
