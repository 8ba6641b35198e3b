// Pluggable differentiable warp maps on displacement space. A warp carries
// its action W(u) and its directional derivative DW|_u(v); rest state maps
// to rest state for every shipped warp.
#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "wiggly/constraints.hpp"
#include "wiggly/errors.hpp"
#include "wiggly/types.hpp"

namespace wiggly {

template <class Scalar>
struct WarpMapT {
  std::string name;
  std::function<VecX<Scalar>(const VecX<Scalar>&)> apply;
  // DW at u, applied to a direction v.
  std::function<VecX<Scalar>(const VecX<Scalar>&, const VecX<Scalar>&)>
      differential;

  VecX<Scalar> operator()(const VecX<Scalar>& u) const { return apply(u); }
};

template <class Scalar = double>
WarpMapT<Scalar> make_identity_warp() {
  WarpMapT<Scalar> w;
  w.name = "identity";
  w.apply = [](const VecX<Scalar>& u) { return u; };
  w.differential = [](const VecX<Scalar>&, const VecX<Scalar>& v) { return v; };
  return w;
}

// Componentwise quadratic warp W(u)_j = u_j + eps*u_j^2 with diagonal
// derivative 1 + 2*eps*u_j.
template <class Scalar = double>
WarpMapT<Scalar> make_poly_warp(Scalar eps = Scalar(0.1)) {
  WarpMapT<Scalar> w;
  w.name = "poly";
  w.apply = [eps](const VecX<Scalar>& u) {
    return (u.array() + eps * u.array().square()).matrix().eval();
  };
  w.differential = [eps](const VecX<Scalar>& u, const VecX<Scalar>& v) {
    return ((1 + 2 * eps * u.array()) * v.array()).matrix().eval();
  };
  return w;
}

// W(u) = u + eps * S (u o u) with a fixed sparse circulant-style mixing
// matrix S; exercises a non-diagonal derivative DW(u) v = v + 2*eps*S(u o v).
template <class Scalar = double>
WarpMapT<Scalar> make_mix_warp(Index n, Scalar eps = Scalar(0.1)) {
  if (n < 1) throw ValidationError("mix warp needs dimension >= 1");
  MatX<Scalar> mix = MatX<Scalar>::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    mix(i, (i + 1) % n) += Scalar(0.5);
    mix(i, (i + 2 * n - 1) % n) += Scalar(-0.25);
  }
  WarpMapT<Scalar> w;
  w.name = "mix";
  w.apply = [eps, mix](const VecX<Scalar>& u) {
    return (u + eps * (mix * u.cwiseProduct(u))).eval();
  };
  w.differential = [eps, mix](const VecX<Scalar>& u, const VecX<Scalar>& v) {
    return (v + 2 * eps * (mix * u.cwiseProduct(v))).eval();
  };
  return w;
}

// Dense derivative matrix DW at u, assembled column by column.
template <class Scalar>
MatX<Scalar> warp_derivative_matrix(const WarpMapT<Scalar>& warp,
                                    const VecX<Scalar>& u) {
  const Index n = u.size();
  MatX<Scalar> d(n, n);
  VecX<Scalar> unit = VecX<Scalar>::Zero(n);
  for (Index j = 0; j < n; ++j) {
    unit[j] = 1;
    d.col(j) = warp.differential(u, unit);
    unit[j] = 0;
  }
  return d;
}

// d/du [DW(u) * udot] by central finite differences on the differential;
// needed in velocity-residual Jacobians when a warp ships no second
// derivative.
template <class Scalar>
MatX<Scalar> warp_velocity_jacobian(const WarpMapT<Scalar>& warp,
                                    const VecX<Scalar>& u,
                                    const VecX<Scalar>& udot) {
  const Index n = u.size();
  const Scalar step = Scalar(1e-6) * (1 + u.template lpNorm<Eigen::Infinity>());
  MatX<Scalar> jac(n, n);
  VecX<Scalar> probe = u;
  for (Index j = 0; j < n; ++j) {
    probe[j] = u[j] + step;
    const VecX<Scalar> hi = warp.differential(probe, udot);
    probe[j] = u[j] - step;
    const VecX<Scalar> lo = warp.differential(probe, udot);
    probe[j] = u[j];
    jac.col(j) = (hi - lo) / (2 * step);
  }
  return jac;
}

// The sparse-constraint problem with warped residuals
//   A_k W(u(t_k)) - a_k  and  B_k DW|_{u(t_k)} u'(t_k) - b_k.
template <class Scalar>
struct WarpedConstraintProblemT {
  ConstraintSetT<Scalar> constraints;
  WarpMapT<Scalar> warp;
};

using WarpMap = WarpMapT<double>;
using WarpedConstraintProblem = WarpedConstraintProblemT<double>;

}  // namespace wiggly
