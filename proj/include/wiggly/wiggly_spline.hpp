// Piecewise-analytic splines solving the quartic Euler-Lagrange ODE
//
//   w'''' + 2*(lambda - 2*delta^2)*w'' + lambda*(lambda*w + g) = 0
//
// per mode. The characteristic polynomial factors as
// (r^2 + 2*delta*r + lambda)*(r^2 - 2*delta*r + lambda), so the
// four-dimensional homogeneous solution space is spanned by a regime-
// dependent basis of exponentials, trig-exponentials or cubics. Each
// interval carries its own local basis centered at the interval midpoint,
// which keeps the growing/decaying exponential pair bounded by
// exp(delta*len/2) and the collocation systems well conditioned.
#pragma once

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include "wiggly/errors.hpp"
#include "wiggly/modal.hpp"
#include "wiggly/quadrature.hpp"
#include "wiggly/trajectory.hpp"
#include "wiggly/types.hpp"

namespace wiggly {

enum class Regime {
  PolyCubic,    // lambda = 0, delta = 0: {1, s, s^2, s^3}
  RigidDamped,  // lambda = 0, delta > 0: {1, s, e^{2ds}, e^{-2ds}}
  Undamped,     // lambda > 0, delta = 0: {cos, sin, s*cos, s*sin} at sqrt(lambda)
  Underdamped,  // 0 < delta^2 < lambda: e^{+-ds} * {cos, sin} at sqrt(lambda - delta^2)
  Critical,     // delta^2 = lambda > 0: {e^{-ds}, s e^{-ds}, e^{ds}, s e^{ds}}
  Overdamped,   // delta^2 > lambda > 0: e^{rs}, r = +-delta +- sqrt(delta^2 - lambda)
};

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::PolyCubic: return "PolyCubic";
    case Regime::RigidDamped: return "RigidDamped";
    case Regime::Undamped: return "Undamped";
    case Regime::Underdamped: return "Underdamped";
    case Regime::Critical: return "Critical";
    case Regime::Overdamped: return "Overdamped";
  }
  return "?";
}

// Boundary ties resolve toward the repeated-root regimes (Critical,
// PolyCubic, RigidDamped, Undamped): their bases stay well conditioned at
// the boundary while the distinct-root bases degenerate there.
template <class Scalar>
Regime classify(Scalar lambda, Scalar delta, Scalar tie_tol = Scalar(1e-9)) {
  if (!(lambda >= 0) || !(delta >= 0))
    throw ValidationError("classify: lambda and delta must be non-negative");
  const Scalar scale = std::max(lambda, delta * delta);
  if (scale == 0) return Regime::PolyCubic;
  if (lambda <= tie_tol * scale)
    return delta > 0 ? Regime::RigidDamped : Regime::PolyCubic;
  if (delta * delta <= tie_tol * scale) return Regime::Undamped;
  if (std::abs(delta * delta - lambda) <= tie_tol * scale)
    return Regime::Critical;
  return delta * delta < lambda ? Regime::Underdamped : Regime::Overdamped;
}

namespace detail {

// d^order/ds^order of s^p.
template <class Scalar>
Scalar monomial_deriv(int p, Scalar s, int order) {
  if (order > p) return 0;
  Scalar factor = 1;
  for (int q = p; q > p - order; --q) factor *= Scalar(q);
  return factor * ipow(s, p - order);
}

// d^order/ds^order of s^q * e^{a s}, q in {0, 1}, real rate.
template <class Scalar>
Scalar exp_deriv(Scalar a, Scalar s, int q, int order) {
  const Scalar e = std::exp(a * s);
  if (q == 0) return ipow(a, order) * e;
  Scalar lead = Scalar(order) * (order > 0 ? ipow(a, order - 1) : Scalar(0));
  return (ipow(a, order) * s + lead) * e;
}

// Same for a complex rate; the basis function is the real or imaginary part.
template <class Scalar>
std::complex<Scalar> exp_deriv(std::complex<Scalar> z, Scalar s, int q,
                               int order) {
  const std::complex<Scalar> e = std::exp(z * s);
  if (q == 0) return ipow(z, order) * e;
  std::complex<Scalar> lead =
      Scalar(order) * (order > 0 ? ipow(z, order - 1)
                                 : std::complex<Scalar>(0));
  return (ipow(z, order) * s + lead) * e;
}

}  // namespace detail

// Derivative of given order (0..4) of the four homogeneous solutions at
// local time s.
template <class Scalar>
Vec4<Scalar> basis_eval(Regime regime, Scalar lambda, Scalar delta, Scalar s,
                        int order) {
  if (order < 0 || order > 4)
    throw ValidationError("basis_eval: order must lie in 0..4");
  using detail::exp_deriv;
  using detail::monomial_deriv;
  using Cx = std::complex<Scalar>;
  Vec4<Scalar> out;
  switch (regime) {
    case Regime::PolyCubic:
      for (int p = 0; p < 4; ++p) out[p] = monomial_deriv(p, s, order);
      return out;
    case Regime::RigidDamped:
      out[0] = monomial_deriv(0, s, order);
      out[1] = monomial_deriv(1, s, order);
      out[2] = exp_deriv(Scalar(2) * delta, s, 0, order);
      out[3] = exp_deriv(Scalar(-2) * delta, s, 0, order);
      return out;
    case Regime::Undamped: {
      const Cx z(0, std::sqrt(lambda));
      const Cx plain = exp_deriv(z, s, 0, order);
      const Cx ramped = exp_deriv(z, s, 1, order);
      out << plain.real(), plain.imag(), ramped.real(), ramped.imag();
      return out;
    }
    case Regime::Underdamped: {
      const Scalar omega = std::sqrt(lambda - delta * delta);
      const Cx decay = exp_deriv(Cx(-delta, omega), s, 0, order);
      const Cx grow = exp_deriv(Cx(delta, omega), s, 0, order);
      out << decay.real(), decay.imag(), grow.real(), grow.imag();
      return out;
    }
    case Regime::Critical:
      out[0] = exp_deriv(-delta, s, 0, order);
      out[1] = exp_deriv(-delta, s, 1, order);
      out[2] = exp_deriv(delta, s, 0, order);
      out[3] = exp_deriv(delta, s, 1, order);
      return out;
    case Regime::Overdamped: {
      const Scalar split = std::sqrt(delta * delta - lambda);
      const Scalar rates[4] = {-delta - split, -delta + split, delta - split,
                               delta + split};
      for (int p = 0; p < 4; ++p) out[p] = exp_deriv(rates[p], s, 0, order);
      return out;
    }
  }
  throw ValidationError("basis_eval: unknown regime");
}

// Constant particular solution of the inhomogeneous quartic ODE. For
// lambda = 0 the forcing term lambda*(lambda*w + g) vanishes identically.
template <class Scalar>
Scalar particular(Scalar lambda, Scalar /*delta*/, Scalar modal_force) {
  return lambda > 0 ? -modal_force / lambda : Scalar(0);
}

// Row vector of the second-order residual operator B'' + 2*delta*B' +
// lambda*B applied to the homogeneous basis; the integrand of the
// spacetime energy is (coeffs . this_row + constant)^2.
template <class Scalar>
Vec4<Scalar> force_residual_row(Regime regime, Scalar lambda, Scalar delta,
                                Scalar s) {
  return basis_eval(regime, lambda, delta, s, 2) +
         2 * delta * basis_eval(regime, lambda, delta, s, 1) +
         lambda * basis_eval(regime, lambda, delta, s, 0);
}

// Row vector of the quartic operator B'''' + 2*(lambda - 2*delta^2)*B'' +
// lambda^2*B; identically zero on exact homogeneous solutions.
template <class Scalar>
Vec4<Scalar> quartic_residual_row(Regime regime, Scalar lambda, Scalar delta,
                                  Scalar s) {
  return basis_eval(regime, lambda, delta, s, 4) +
         2 * (lambda - 2 * delta * delta) *
             basis_eval(regime, lambda, delta, s, 2) +
         lambda * lambda * basis_eval(regime, lambda, delta, s, 0);
}

// Linear map from Hermite end data (value, velocity at both interval ends)
// to the four basis coefficients, with the condition number of the
// column-equilibrated collocation matrix.
template <class Scalar>
struct HermiteMapT {
  Mat4<Scalar> dof_to_coeffs;
  Scalar condition = 0;
};

template <class Scalar>
HermiteMapT<Scalar> hermite_map(Regime regime, Scalar lambda, Scalar delta,
                                Scalar t_begin, Scalar t_end) {
  if (!(t_end > t_begin))
    throw ValidationError("hermite_map: interval must have positive length");
  const Scalar half = (t_end - t_begin) / 2;

  Mat4<Scalar> collocation;
  collocation.row(0) = basis_eval(regime, lambda, delta, -half, 0).transpose();
  collocation.row(1) = basis_eval(regime, lambda, delta, -half, 1).transpose();
  collocation.row(2) = basis_eval(regime, lambda, delta, half, 0).transpose();
  collocation.row(3) = basis_eval(regime, lambda, delta, half, 1).transpose();

  auto fail = [&]() -> SolverError {
    std::ostringstream msg;
    msg << "ill-conditioned interval (lambda=" << double(lambda)
        << ", delta=" << double(delta) << ", length=" << double(2 * half)
        << ")";
    return SolverError(msg.str());
  };
  if (!collocation.allFinite()) throw fail();

  // Column equilibration: the growing/decaying exponential pairs differ by
  // exp(delta*len) in magnitude, which would otherwise dominate the
  // condition estimate without affecting the solvable accuracy.
  Vec4<Scalar> col_scale;
  for (int p = 0; p < 4; ++p) {
    col_scale[p] = collocation.col(p).cwiseAbs().maxCoeff();
    if (col_scale[p] == 0) throw fail();
  }
  Mat4<Scalar> equilibrated = collocation * col_scale.cwiseInverse().asDiagonal();

  Eigen::JacobiSVD<Mat4<Scalar>> svd(
      equilibrated, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Scalar sigma_min = svd.singularValues()(3);
  const Scalar sigma_max = svd.singularValues()(0);
  if (!(sigma_min > 0) || sigma_max / sigma_min > Scalar(1e12)) throw fail();

  HermiteMapT<Scalar> map;
  map.condition = sigma_max / sigma_min;
  map.dof_to_coeffs =
      col_scale.cwiseInverse().asDiagonal() * svd.solve(Mat4<Scalar>::Identity());
  return map;
}

// Coefficients of the spline piece attaining the given end data
// (value_begin, velocity_begin, value_end, velocity_end).
template <class Scalar>
Vec4<Scalar> hermite_to_coeffs(Regime regime, Scalar lambda, Scalar delta,
                               Scalar modal_force, Scalar t_begin,
                               Scalar t_end, const Vec4<Scalar>& end_data) {
  const Scalar part = particular(lambda, delta, modal_force);
  Vec4<Scalar> rhs = end_data;
  rhs[0] -= part;
  rhs[2] -= part;
  return hermite_map(regime, lambda, delta, t_begin, t_end).dof_to_coeffs * rhs;
}

// One mode's piecewise-analytic spline over the shared node intervals.
template <class Scalar>
struct WigglySplineT {
  Scalar lambda = 0;
  Scalar delta = 0;
  Scalar modal_force = 0;
  Regime regime = Regime::PolyCubic;
  Scalar particular_part = 0;
  VecX<Scalar> nodes;       // m+1 strictly increasing times
  VecX<Scalar> values;      // Hermite data at the nodes
  VecX<Scalar> velocities;
  MatX<Scalar> coeffs;      // m x 4, midpoint-centered local bases

  Index intervals() const { return coeffs.rows(); }
};

template <class Scalar>
WigglySplineT<Scalar> build_spline(Scalar lambda, Scalar delta,
                                   Scalar modal_force,
                                   const VecX<Scalar>& nodes,
                                   const VecX<Scalar>& values,
                                   const VecX<Scalar>& velocities) {
  const Index count = nodes.size();
  if (count < 2) throw ValidationError("spline needs at least two nodes");
  for (Index k = 0; k + 1 < count; ++k)
    if (!(nodes[k + 1] > nodes[k]))
      throw ValidationError("node times must be strictly increasing");
  if (values.size() != count || velocities.size() != count)
    throw ValidationError("Hermite data must match the node count");

  WigglySplineT<Scalar> spline;
  spline.lambda = lambda;
  spline.delta = delta;
  spline.modal_force = modal_force;
  spline.regime = classify(lambda, delta);
  spline.particular_part = particular(lambda, delta, modal_force);
  spline.nodes = nodes;
  spline.values = values;
  spline.velocities = velocities;
  spline.coeffs.resize(count - 1, 4);
  for (Index j = 0; j + 1 < count; ++j) {
    Vec4<Scalar> end_data(values[j], velocities[j], values[j + 1],
                          velocities[j + 1]);
    spline.coeffs.row(j) =
        hermite_to_coeffs(spline.regime, lambda, delta, modal_force, nodes[j],
                          nodes[j + 1], end_data)
            .transpose();
  }
  return spline;
}

namespace detail {

template <class Scalar>
Index locate_interval(const WigglySplineT<Scalar>& spline, Scalar t) {
  const auto& nodes = spline.nodes;
  const Index m = spline.intervals();
  if (t < nodes[0] || t > nodes[m])
    throw ValidationError("evaluation time outside spline range");
  Index j = std::upper_bound(nodes.data(), nodes.data() + m, t) - nodes.data();
  return std::clamp<Index>(j - 1, 0, m - 1);
}

template <class Scalar>
Scalar eval_piece(const WigglySplineT<Scalar>& spline, Index j, Scalar t,
                  int order) {
  const Scalar mid = (spline.nodes[j] + spline.nodes[j + 1]) / 2;
  Scalar value = spline.coeffs.row(j).dot(
      basis_eval(spline.regime, spline.lambda, spline.delta, t - mid, order));
  if (order == 0) value += spline.particular_part;
  return value;
}

}  // namespace detail

// Piecewise evaluation. At interior nodes derivatives of order >= 2 are
// one-sided; use one_sided() there.
template <class Scalar>
Scalar eval_spline(const WigglySplineT<Scalar>& spline, Scalar t, int order) {
  if (order < 0 || order > 4)
    throw ValidationError("eval_spline: order must lie in 0..4");
  const Index j = detail::locate_interval(spline, t);
  if (order >= 2)
    for (Index k = 1; k < spline.intervals(); ++k)
      if (t == spline.nodes[k])
        throw ValidationError(
            "order >= 2 is one-sided at interior nodes; use one_sided");
  return detail::eval_piece(spline, j, t, order);
}

enum class Side { Left, Right };

// One-sided derivative limit at node k: the adjacent interval's piece
// evaluated at the node.
template <class Scalar>
Scalar one_sided(const WigglySplineT<Scalar>& spline, Index k, int order,
                 Side side) {
  if (order < 2 || order > 3)
    throw ValidationError("one_sided: order must be 2 or 3");
  const Index m = spline.intervals();
  if (k < 0 || k > m) throw ValidationError("one_sided: node out of range");
  if (side == Side::Left && k == 0)
    throw ValidationError("one_sided: no interval left of the first node");
  if (side == Side::Right && k == m)
    throw ValidationError("one_sided: no interval right of the last node");
  const Index j = side == Side::Left ? k - 1 : k;
  return detail::eval_piece(spline, j, spline.nodes[k], order);
}

// Max quartic-ODE residual over 7 Gauss points per interval, with the
// magnitude scale of the individual terms for relative comparison.
template <class Scalar>
struct OdeResidualT {
  Scalar max_residual = 0;
  Scalar scale = 0;
};

template <class Scalar>
OdeResidualT<Scalar> ode_residual(const WigglySplineT<Scalar>& spline) {
  OdeResidualT<Scalar> result;
  const Scalar lambda = spline.lambda;
  const Scalar stretch = 2 * std::abs(lambda - 2 * spline.delta * spline.delta);
  for (Index j = 0; j < spline.intervals(); ++j) {
    const Scalar lo = spline.nodes[j], hi = spline.nodes[j + 1];
    const Scalar mid = (lo + hi) / 2, half = (hi - lo) / 2;
    for (int g = 0; g < kGaussOrder; ++g) {
      const Scalar t = mid + half * Scalar(kGaussNodes[g]);
      const Scalar w4 = detail::eval_piece(spline, j, t, 4);
      const Scalar w2 = detail::eval_piece(spline, j, t, 2);
      const Scalar w0 = detail::eval_piece(spline, j, t, 0);
      const Scalar residual = w4 + 2 * (lambda - 2 * spline.delta * spline.delta) * w2 +
                              lambda * (lambda * w0 + spline.modal_force);
      const Scalar scale = std::abs(w4) + stretch * std::abs(w2) +
                           lambda * (lambda * std::abs(w0) +
                                     std::abs(spline.modal_force));
      result.max_residual = std::max(result.max_residual, std::abs(residual));
      result.scale = std::max(result.scale, scale);
    }
  }
  return result;
}

// All retained modes' splines over a shared node vector.
template <class Scalar>
struct WigglySolutionT {
  ModalBasisT<Scalar> basis;
  VecX<Scalar> nodes;
  std::vector<WigglySplineT<Scalar>> splines;  // one per retained mode
  VecX<Scalar> dof;  // stacked Hermite DOF (mode-major, node-major,
                     // value before velocity)

  Index mode_count() const { return Index(splines.size()); }
};

// Modal coordinates (or their time derivatives) at time t.
template <class Scalar>
VecX<Scalar> modal_state(const WigglySolutionT<Scalar>& sol, Scalar t,
                         int order) {
  VecX<Scalar> w(sol.mode_count());
  for (Index i = 0; i < sol.mode_count(); ++i)
    w[i] = eval_spline(sol.splines[size_t(i)], t, order);
  return w;
}

template <class Scalar>
TrajectoryT<Scalar> sample_solution(const WigglySolutionT<Scalar>& sol,
                                    const VecX<Scalar>& times,
                                    bool with_velocities) {
  TrajectoryT<Scalar> traj;
  traj.times = times;
  traj.displacements.resize(times.size(), sol.basis.dim());
  if (with_velocities) traj.velocities.resize(times.size(), sol.basis.dim());
  for (Index i = 0; i < times.size(); ++i) {
    traj.displacements.row(i) =
        (sol.basis.modes * modal_state(sol, times[i], 0)).transpose();
    if (with_velocities)
      traj.velocities.row(i) =
          (sol.basis.modes * modal_state(sol, times[i], 1)).transpose();
  }
  return traj;
}

using WigglySpline = WigglySplineT<double>;
using WigglySolution = WigglySolutionT<double>;

}  // namespace wiggly
