// Generalized eigendecomposition K*phi = lambda*M*phi, M-orthonormal modes,
// per-mode damping ratios and modal force components.
#pragma once

#include <Eigen/Eigenvalues>
#include <vector>

#include "wiggly/errors.hpp"
#include "wiggly/model.hpp"

namespace wiggly {

template <class Scalar>
struct ModalBasisT {
  VecX<Scalar> eigenvalues;   // lambda_i >= 0, ascending
  MatX<Scalar> modes;         // n x r, columns M-orthonormal
  VecX<Scalar> damping;       // delta_i = (alpha + beta*lambda_i) / 2
  VecX<Scalar> modal_force;   // modes^T * load
  MatX<Scalar> projector;     // modes^T * M, maps displacements to modal coords
  std::vector<bool> rigid;    // eigenvalue below the rigid-mode threshold

  Index count() const { return eigenvalues.size(); }
  Index dim() const { return modes.rows(); }
};

// Dense symmetric-definite solve via Cholesky reduction of M (Eigen's
// GeneralizedSelfAdjointEigenSolver). Modes are returned M-orthonormal,
// each flipped so its largest-magnitude entry is positive; eigenvalues
// under the rigid threshold are clamped to exactly zero so the rigid
// spline regimes are hit exactly downstream.
template <class Scalar>
ModalBasisT<Scalar> eigendecompose(const ModelSystemT<Scalar>& sys,
                                   Index retained) {
  const Index n = sys.dim();
  if (retained < 1 || retained > n)
    throw ValidationError("retained mode count must lie in [1, n]");

  Eigen::GeneralizedSelfAdjointEigenSolver<MatX<Scalar>> eig(
      sys.stiffness, sys.mass, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (eig.info() != Eigen::Success)
    throw SolverError("generalized eigensolve failed");

  ModalBasisT<Scalar> basis;
  basis.eigenvalues = eig.eigenvalues().head(retained);
  basis.modes = eig.eigenvectors().leftCols(retained);

  // Rigid threshold: relative to the largest eigenvalue of the full
  // spectrum, absolute when the stiffness is identically zero.
  const Scalar lambda_max = eig.eigenvalues()(n - 1);
  const Scalar threshold =
      lambda_max > 0 ? Scalar(1e-9) * lambda_max : Scalar(1e-12);
  basis.rigid.resize(size_t(retained));
  for (Index i = 0; i < retained; ++i) {
    basis.rigid[size_t(i)] = basis.eigenvalues[i] < threshold;
    if (basis.rigid[size_t(i)]) basis.eigenvalues[i] = 0;
  }

  for (Index i = 0; i < retained; ++i) {
    Index at = 0;
    basis.modes.col(i).cwiseAbs().maxCoeff(&at);
    if (basis.modes(at, i) < 0) basis.modes.col(i) = -basis.modes.col(i);
  }

  basis.damping =
      ((sys.alpha + sys.beta * basis.eigenvalues.array()) / 2).matrix();
  basis.modal_force = basis.modes.transpose() * sys.load;
  basis.projector = basis.modes.transpose() * sys.mass;
  return basis;
}

// Modal coordinates of a displacement: w_i = phi_i^T * M * u.
template <class Scalar>
VecX<Scalar> to_modal(const ModalBasisT<Scalar>& basis,
                      const VecX<Scalar>& u) {
  if (u.size() != basis.dim())
    throw ValidationError("to_modal: displacement dimension mismatch");
  return basis.projector * u;
}

template <class Scalar>
VecX<Scalar> from_modal(const ModalBasisT<Scalar>& basis,
                        const VecX<Scalar>& w) {
  if (w.size() != basis.count())
    throw ValidationError("from_modal: modal dimension mismatch");
  return basis.modes * w;
}

using ModalBasis = ModalBasisT<double>;

}  // namespace wiggly
